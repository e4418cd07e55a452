#include "anchorpano/kdtree2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace anchorpano {

namespace {

double coord(Point2 p, int axis) { return axis == 0 ? p.x : p.y; }

}  // namespace

KdTree2D::KdTree2D(std::span<const Point2> points) : points_(points.begin(), points.end()) {
    std::vector<std::size_t> idx(points_.size());
    std::iota(idx.begin(), idx.end(), 0);
    nodes_.reserve(points_.size());
    root_ = build(idx, 0, idx.size(), 0);
}

int KdTree2D::build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % 2;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi, [&](std::size_t a, std::size_t b) {
        const double ca = coord(points_[a], axis), cb = coord(points_[b], axis);
        return ca < cb || (ca == cb && a < b);
    });
    const int node = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{idx[mid], axis});
    const int left = build(idx, lo, mid, depth + 1);
    const int right = build(idx, mid + 1, hi, depth + 1);
    nodes_[node].left = left;
    nodes_[node].right = right;
    return node;
}

void KdTree2D::search(int node, Point2 q, std::size_t& best, double& best_d2) const {
    if (node < 0) return;
    const Node& n = nodes_[node];
    const Point2 p = points_[n.point];
    const double dx = p.x - q.x, dy = p.y - q.y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2 || (d2 == best_d2 && n.point < best)) {
        best_d2 = d2;
        best = n.point;
    }
    const double diff = coord(q, n.axis) - coord(p, n.axis);
    const int near_child = diff < 0 ? n.left : n.right;
    const int far_child = diff < 0 ? n.right : n.left;
    search(near_child, q, best, best_d2);
    // <= keeps equal-distance candidates on the far side reachable for tie-breaking.
    if (diff * diff <= best_d2) search(far_child, q, best, best_d2);
}

std::optional<KdTree2D::Hit> KdTree2D::nearest(Point2 q) const {
    if (root_ < 0) return std::nullopt;
    std::size_t best = std::numeric_limits<std::size_t>::max();
    double best_d2 = std::numeric_limits<double>::infinity();
    search(root_, q, best, best_d2);
    return Hit{best, std::sqrt(best_d2)};
}

}  // namespace anchorpano
