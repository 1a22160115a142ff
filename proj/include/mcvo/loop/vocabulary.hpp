#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mcvo/frontend/descriptor.hpp"

namespace mcvo {

/// Leaves of a hierarchical k-medians tree over 256-bit descriptors, with
/// inverse-document-frequency weights. Descriptors are quantized to the
/// nearest leaf by Hamming distance (lowest index on ties).
struct Vocabulary {
  int k = 10;
  int depth = 3;
  std::vector<Descriptor> words;
  std::vector<double> weights;

  int size() const { return static_cast<int>(words.size()); }
  bool empty() const { return words.empty(); }
  int quantize(const Descriptor& d) const;

  bool operator==(const Vocabulary& other) const = default;
};

/// Hierarchical k-medians under Hamming distance, deterministic per seed.
/// A node with fewer than k descriptors becomes a leaf early. Leaf weights
/// are log(N / n_w) over the N training descriptors. Throws
/// std::invalid_argument when k < 2, depth < 1 or the set is empty.
Vocabulary build_vocabulary(std::span<const Descriptor> descriptors, int k, int depth,
                            std::uint64_t seed);

/// Binary file: "MCVOVOC1", uint32 k, uint32 depth, uint32 word count, then
/// per word 32 descriptor bytes and a float64 weight, all little-endian.
void save_vocabulary(const Vocabulary& vocabulary, const std::string& path);
/// Throws std::runtime_error on a missing file or malformed content.
Vocabulary load_vocabulary(const std::string& path);

/// Sparse tf-idf histogram, L1-normalized; word -> weight.
using BowVector = std::map<int, double>;

/// Empty when there are no descriptors or every weight is zero.
BowVector bow_vector(std::span<const Descriptor> descriptors, const Vocabulary& vocabulary);

/// 1 - 0.5 * |a - b|_1 in [0, 1]; 0 when either vector is empty.
double bow_similarity(const BowVector& a, const BowVector& b);

}  // namespace mcvo
