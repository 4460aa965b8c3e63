#pragma once

#include "streamhead/numerics/array.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

namespace streamhead::numerics {

namespace detail {
struct Node;
}

// Handle to a node of the dynamic (per forward pass) computation tape.
// Copies share the node. Nodes are freed once no handle or child refers to them.
class Var {
public:
    Var();
    explicit Var(Array value);

    static Var constant(Array value);
    static Var parameter(Array value);

    const Array & value() const;
    const Shape & shape() const { return value().shape(); }
    bool requires_grad() const;
    bool detached() const;
    bool is_leaf() const;
    const detail::Node * id() const { return node_.get(); }

    // Overwrites the value of a leaf in place (optimizer updates).
    void assign(Array value);

    explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    const std::shared_ptr<detail::Node> & node() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

// d(root)/d(leaf) for every requires_grad leaf reachable from root.
class GradientMap {
public:
    // Gradient for `param`, or exact zeros of its shape when it is unreachable.
    Array operator[](const Var & param) const;
    bool contains(const Var & param) const;
    std::size_t size() const { return grads_.size(); }

    void set(const detail::Node * key, Array grad) { grads_[key] = std::move(grad); }

private:
    std::unordered_map<const detail::Node *, Array> grads_;
};

GradientMap backward(const Var & root);

// Same value, no gradient path to x.
Var detach(const Var & x);

// While alive, new operations on this thread record no graph.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard &) = delete;
    NoGradGuard & operator=(const NoGradGuard &) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Graph-node accounting for this thread: nodes that carry a recorded backward edge.
struct GraphStats {
    static std::size_t live();
    static std::size_t peak();
    static void reset_peak();
};

// elementwise, identical shapes
Var add(const Var & a, const Var & b);
Var sub(const Var & a, const Var & b);
Var mul(const Var & a, const Var & b);
// scalar with array
Var add_scalar(const Var & a, double s);
Var scale(const Var & a, double s);
Var neg(const Var & a);
Var square(const Var & a);
Var silu(const Var & a);
Var tanh(const Var & a);

// rank-2
Var matmul(const Var & a, const Var & b);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(const Var & a, std::size_t begin, std::size_t end);
Var slice_cols(const Var & a, std::size_t begin, std::size_t end);
Var mean_rows(const Var & a);                 // (m, n) -> (1, n)
Var repeat_rows(const Var & row, std::size_t m); // (n) or (1, n) -> (m, n)

Var reshape(const Var & a, Shape shape);

// reductions to rank-0
Var sum(const Var & a);
Var mean(const Var & a);
Var sum_squares(const Var & a);
Var mse(const Var & a, const Var & b);

inline Var operator+(const Var & a, const Var & b) { return add(a, b); }
inline Var operator-(const Var & a, const Var & b) { return sub(a, b); }
inline Var operator*(const Var & a, const Var & b) { return mul(a, b); }
inline Var operator*(const Var & a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var & a) { return scale(a, s); }

} // namespace streamhead::numerics
