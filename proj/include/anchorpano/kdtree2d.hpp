#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace anchorpano {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Static 2D kd-tree over a point set, built once and queried read-only.
class KdTree2D {
public:
    KdTree2D() = default;
    explicit KdTree2D(std::span<const Point2> points);

    struct Hit {
        std::size_t index;  // into the construction span
        double distance;
    };

    /// Nearest point; ties resolve to the lowest construction index.
    std::optional<Hit> nearest(Point2 q) const;
    std::size_t size() const { return points_.size(); }

private:
    struct Node {
        std::size_t point;  // index into points_
        int axis;
        int left = -1;
        int right = -1;
    };

    int build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, int depth);
    void search(int node, Point2 q, std::size_t& best, double& best_d2) const;

    std::vector<Point2> points_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace anchorpano
