#include "mcvo/frontend/feature_selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

namespace mcvo {

namespace {

struct Node {
  ImageRect rect;
  std::vector<int> tracked;
  std::vector<int> candidates;
  std::uint64_t zorder = 0;

  int population() const {
    return static_cast<int>(tracked.size() + candidates.size());
  }
  bool eligible() const { return tracked.empty() && !candidates.empty(); }
};

std::uint64_t interleave(std::uint32_t x, std::uint32_t y) {
  std::uint64_t out = 0;
  for (int bit = 0; bit < 32; ++bit) {
    out |= static_cast<std::uint64_t>((x >> bit) & 1u) << (2 * bit);
    out |= static_cast<std::uint64_t>((y >> bit) & 1u) << (2 * bit + 1);
  }
  return out;
}

std::uint64_t zorder_of(const ImageRect& rect, const ImageRect& root) {
  const auto x = static_cast<std::uint32_t>(std::max(0.0, std::floor(rect.x0 - root.x0)));
  const auto y = static_cast<std::uint32_t>(std::max(0.0, std::floor(rect.y0 - root.y0)));
  return interleave(x, y);
}

bool ranks_before(const Node& a, const Node& b) {
  if (a.population() != b.population()) return a.population() > b.population();
  return a.zorder < b.zorder;
}

}  // namespace

std::vector<int> select_features_3priority(
    const std::vector<TrackedFeature>& tracked,
    const std::vector<FeatureCandidate>& candidates, const ImageRect& bounds,
    const SelectionOptions& options) {
  if (options.target_count <= 0) {
    throw std::invalid_argument("target_count must be positive");
  }
  if (options.suppression_radius < 0.0) {
    throw std::invalid_argument("suppression radius must be non-negative");
  }
  if (candidates.empty()) return {};

  const double r2 = options.suppression_radius * options.suppression_radius;
  Node root;
  root.rect = bounds;
  for (int i = 0; i < static_cast<int>(tracked.size()); ++i) {
    if (bounds.contains(tracked[i].pixel)) root.tracked.push_back(i);
  }
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    const auto& px = candidates[i].pixel;
    if (!bounds.contains(px)) continue;
    const bool suppressed = std::any_of(tracked.begin(), tracked.end(), [&](const auto& t) {
      return (t.pixel - px).squaredNorm() <= r2;
    });
    if (!suppressed) root.candidates.push_back(i);
  }
  if (root.candidates.empty()) return {};

  std::vector<Node> leaves;
  leaves.push_back(std::move(root));
  auto eligible_count = [&] {
    return std::count_if(leaves.begin(), leaves.end(),
                         [](const Node& n) { return n.eligible(); });
  };
  auto splittable = [&](const Node& n) {
    return n.population() > 1 && n.rect.width() / 2.0 >= options.min_cell_side &&
           n.rect.height() / 2.0 >= options.min_cell_side;
  };

  while (eligible_count() < options.target_count) {
    int best = -1;
    for (int i = 0; i < static_cast<int>(leaves.size()); ++i) {
      if (!splittable(leaves[i])) continue;
      if (best < 0 || ranks_before(leaves[i], leaves[best])) best = i;
    }
    if (best < 0) break;

    Node parent = std::move(leaves[best]);
    leaves.erase(leaves.begin() + best);
    const double mx = 0.5 * (parent.rect.x0 + parent.rect.x1);
    const double my = 0.5 * (parent.rect.y0 + parent.rect.y1);
    Node children[4];
    children[0].rect = {parent.rect.x0, parent.rect.y0, mx, my};
    children[1].rect = {mx, parent.rect.y0, parent.rect.x1, my};
    children[2].rect = {parent.rect.x0, my, mx, parent.rect.y1};
    children[3].rect = {mx, my, parent.rect.x1, parent.rect.y1};
    auto quadrant = [&](const Eigen::Vector2d& p) {
      return (p.x() < mx ? 0 : 1) + (p.y() < my ? 0 : 2);
    };
    for (int t : parent.tracked) children[quadrant(tracked[t].pixel)].tracked.push_back(t);
    for (int c : parent.candidates) {
      children[quadrant(candidates[c].pixel)].candidates.push_back(c);
    }
    for (auto& child : children) {
      if (child.population() == 0) continue;
      child.zorder = zorder_of(child.rect, bounds);
      leaves.push_back(std::move(child));
    }
  }

  std::vector<const Node*> eligible;
  for (const auto& n : leaves) {
    if (n.eligible()) eligible.push_back(&n);
  }
  std::sort(eligible.begin(), eligible.end(),
            [](const Node* a, const Node* b) { return ranks_before(*a, *b); });
  if (static_cast<int>(eligible.size()) > options.target_count) {
    eligible.resize(options.target_count);
  }

  std::vector<int> selected;
  selected.reserve(eligible.size());
  for (const Node* n : eligible) {
    int best = n->candidates.front();
    for (int c : n->candidates) {
      if (candidates[c].score > candidates[best].score ||
          (candidates[c].score == candidates[best].score && c < best)) {
        best = c;
      }
    }
    selected.push_back(best);
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

std::vector<int> select_features_by_score(
    const std::vector<FeatureCandidate>& candidates, int target_count) {
  std::vector<int> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return candidates[a].score > candidates[b].score;
  });
  if (static_cast<int>(order.size()) > target_count) order.resize(target_count);
  std::sort(order.begin(), order.end());
  return order;
}

double compute_sfd(const std::vector<Eigen::Vector2d>& features,
                   const ImageRect& bounds, int grid) {
  if (grid < 1) throw std::invalid_argument("grid must be >= 1");
  std::vector<double> counts(static_cast<std::size_t>(grid) * grid, 0.0);
  for (const auto& p : features) {
    int gx = static_cast<int>(std::floor((p.x() - bounds.x0) / bounds.width() * grid));
    int gy = static_cast<int>(std::floor((p.y() - bounds.y0) / bounds.height() * grid));
    gx = std::clamp(gx, 0, grid - 1);
    gy = std::clamp(gy, 0, grid - 1);
    counts[static_cast<std::size_t>(gy) * grid + gx] += 1.0;
  }
  const double mean =
      std::accumulate(counts.begin(), counts.end(), 0.0) / static_cast<double>(counts.size());
  double var = 0.0;
  for (double c : counts) var += (c - mean) * (c - mean);
  return var / static_cast<double>(counts.size());
}

}  // namespace mcvo
