#include "mcvo/loop/vocabulary.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

namespace mcvo {

namespace {

Descriptor bitwise_median(std::span<const Descriptor* const> members) {
  Descriptor out{};
  const std::size_t n = members.size();
  for (int bit = 0; bit < 256; ++bit) {
    std::size_t ones = 0;
    for (const Descriptor* d : members) ones += get_bit(*d, bit);
    if (2 * ones > n) out[bit >> 6] |= std::uint64_t{1} << (bit & 63);
  }
  return out;
}

int nearest(const Descriptor& d, const std::vector<Descriptor>& centers) {
  int best = 0;
  int best_d = std::numeric_limits<int>::max();
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const int h = hamming(d, centers[i]);
    if (h < best_d) {
      best_d = h;
      best = static_cast<int>(i);
    }
  }
  return best;
}

/// k-medians++ seeding followed by Lloyd-style refinement.
std::vector<std::vector<const Descriptor*>> cluster(const std::vector<const Descriptor*>& set, int k,
                                                     std::mt19937_64& rng) {
  std::vector<Descriptor> centers;
  std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
  centers.push_back(*set[pick(rng)]);
  std::vector<double> dist(set.size());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const double h = hamming(*set[i], centers[nearest(*set[i], centers)]);
      dist[i] = h * h;
      total += dist[i];
    }
    if (total <= 0.0) break;
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng);
    std::size_t chosen = set.size() - 1;
    for (std::size_t i = 0; i < set.size(); ++i) {
      r -= dist[i];
      if (r < 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(*set[chosen]);
  }

  std::vector<int> assign(set.size(), -1);
  std::vector<std::vector<const Descriptor*>> groups;
  for (int iter = 0; iter < 20; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const int a = nearest(*set[i], centers);
      if (a != assign[i]) {
        assign[i] = a;
        changed = true;
      }
    }
    groups.assign(centers.size(), {});
    for (std::size_t i = 0; i < set.size(); ++i) groups[assign[i]].push_back(set[i]);
    if (!changed) break;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (!groups[c].empty()) centers[c] = bitwise_median(groups[c]);
    }
  }
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  return groups;
}

void split(const std::vector<const Descriptor*>& set, int level, int k, int depth,
           std::mt19937_64& rng, std::vector<Descriptor>& leaves) {
  if (level == depth || static_cast<int>(set.size()) < k) {
    leaves.push_back(bitwise_median(set));
    return;
  }
  const auto groups = cluster(set, k, rng);
  if (groups.size() < 2) {
    leaves.push_back(bitwise_median(set));
    return;
  }
  for (const auto& g : groups) split(g, level + 1, k, depth, rng, leaves);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const int c = in.get();
    if (c == EOF) throw std::runtime_error("vocabulary file truncated");
    v |= static_cast<std::uint32_t>(c) << (8 * i);
  }
  return v;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = in.get();
    if (c == EOF) throw std::runtime_error("vocabulary file truncated");
    v |= static_cast<std::uint64_t>(c) << (8 * i);
  }
  return v;
}

}  // namespace

int Vocabulary::quantize(const Descriptor& d) const { return nearest(d, words); }

Vocabulary build_vocabulary(std::span<const Descriptor> descriptors, int k, int depth,
                            std::uint64_t seed) {
  if (k < 2 || depth < 1) throw std::invalid_argument("vocabulary needs k >= 2 and depth >= 1");
  if (descriptors.empty()) throw std::invalid_argument("vocabulary needs training descriptors");
  std::vector<const Descriptor*> set;
  set.reserve(descriptors.size());
  for (const auto& d : descriptors) set.push_back(&d);
  std::mt19937_64 rng(seed);

  Vocabulary vocabulary;
  vocabulary.k = k;
  vocabulary.depth = depth;
  std::vector<Descriptor> leaves;
  split(set, 0, k, depth, rng, leaves);
  // identical leaves would make one unreachable
  for (const auto& leaf : leaves) {
    if (std::find(vocabulary.words.begin(), vocabulary.words.end(), leaf) ==
        vocabulary.words.end()) {
      vocabulary.words.push_back(leaf);
    }
  }
  std::vector<int> counts(vocabulary.words.size(), 0);
  for (const auto& d : descriptors) ++counts[vocabulary.quantize(d)];
  const double n = static_cast<double>(descriptors.size());
  for (int c : counts) vocabulary.weights.push_back(std::log(n / std::max(c, 1)));
  return vocabulary;
}

void save_vocabulary(const Vocabulary& vocabulary, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write("MCVOVOC1", 8);
  put_u32(out, static_cast<std::uint32_t>(vocabulary.k));
  put_u32(out, static_cast<std::uint32_t>(vocabulary.depth));
  put_u32(out, static_cast<std::uint32_t>(vocabulary.words.size()));
  for (std::size_t i = 0; i < vocabulary.words.size(); ++i) {
    for (std::uint64_t word : vocabulary.words[i]) put_u64(out, word);
    put_u64(out, std::bit_cast<std::uint64_t>(vocabulary.weights[i]));
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "MCVOVOC1", 8) != 0) {
    throw std::runtime_error(path + ": not a vocabulary file");
  }
  Vocabulary vocabulary;
  vocabulary.k = static_cast<int>(get_u32(in));
  vocabulary.depth = static_cast<int>(get_u32(in));
  const std::uint32_t count = get_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    Descriptor d;
    for (auto& word : d) word = get_u64(in);
    const double w = std::bit_cast<double>(get_u64(in));
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::runtime_error(path + ": invalid weight");
    vocabulary.words.push_back(d);
    vocabulary.weights.push_back(w);
  }
  return vocabulary;
}

BowVector bow_vector(std::span<const Descriptor> descriptors, const Vocabulary& vocabulary) {
  BowVector bow;
  if (descriptors.empty() || vocabulary.empty()) return bow;
  for (const auto& d : descriptors) {
    const int w = vocabulary.quantize(d);
    bow[w] += vocabulary.weights[w];
  }
  double total = 0.0;
  for (const auto& [w, v] : bow) total += v;
  if (!(total > 0.0)) return {};
  for (auto& [w, v] : bow) v /= total;
  std::erase_if(bow, [](const auto& e) { return e.second == 0.0; });
  return bow;
}

double bow_similarity(const BowVector& a, const BowVector& b) {
  if (a.empty() || b.empty()) return 0.0;
  double l1 = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      l1 += std::abs(ia->second);
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      l1 += std::abs(ib->second);
      ++ib;
    } else {
      l1 += std::abs(ia->second - ib->second);
      ++ia;
      ++ib;
    }
  }
  return std::clamp(1.0 - 0.5 * l1, 0.0, 1.0);
}

}  // namespace mcvo
