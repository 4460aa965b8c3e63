#include "streamhead/numerics/autodiff.hpp"

#include "streamhead/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace streamhead::numerics {

namespace detail {

using BackwardFn = std::function<void(const Node & self, const Array & upstream, std::span<Array *> parent_grads)>;

struct Node {
    Array value;
    bool requires_grad = false;
    bool detached = false;
    bool counted = false;
    std::vector<std::shared_ptr<Node>> parents;
    BackwardFn backward_fn;

    ~Node();
};

namespace {
std::atomic<std::size_t> g_live{0};
std::atomic<std::size_t> g_peak{0};
thread_local bool t_grad_enabled = true;

void count_node() {
    const std::size_t now = g_live.fetch_add(1) + 1;
    std::size_t prev = g_peak.load();
    while (now > prev && !g_peak.compare_exchange_weak(prev, now)) {
    }
}
} // namespace

Node::~Node() {
    if (counted) g_live.fetch_sub(1);
}

} // namespace detail

using detail::Node;

namespace {

Var make_op(Array value, std::vector<Var> parents, detail::BackwardFn fn) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    const bool needs = detail::t_grad_enabled &&
                       std::any_of(parents.begin(), parents.end(), [](const Var & p) { return p.requires_grad(); });
    if (needs) {
        node->requires_grad = true;
        node->parents.reserve(parents.size());
        for (auto & p : parents) node->parents.push_back(p.node());
        node->backward_fn = std::move(fn);
        node->counted = true;
        detail::count_node();
    }
    return Var(std::move(node));
}

void require_same_shape(const Var & a, const Var & b, const char * op) {
    STREAMHEAD_REQUIRE(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                                     " vs " + shape_str(b.shape()));
}

void require_rank2(const Var & a, const char * op) {
    STREAMHEAD_REQUIRE(a.value().rank() == 2, std::string(op) + ": expected rank-2, got " + shape_str(a.shape()));
}

void accumulate(Array * dst, const Array & src) {
    if (!dst) return;
    auto d = dst->data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

template <class F>
Array map_values(const Array & a, F f) {
    Array out(a.shape());
    auto src = a.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
    return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

Var::Var() : Var(Array::scalar(0.0)) {}

Var::Var(Array value) : node_(std::make_shared<Node>()) { node_->value = std::move(value); }

Var Var::constant(Array value) { return Var(std::move(value)); }

Var Var::parameter(Array value) {
    Var v(std::move(value));
    v.node_->requires_grad = true;
    return v;
}

const Array & Var::value() const { return node_->value; }
bool Var::requires_grad() const { return node_->requires_grad; }
bool Var::detached() const { return node_->detached; }
bool Var::is_leaf() const { return node_->parents.empty(); }

void Var::assign(Array value) {
    STREAMHEAD_REQUIRE(is_leaf(), "assign on a non-leaf node");
    STREAMHEAD_REQUIRE(value.shape() == node_->value.shape(), "assign changes shape");
    node_->value = std::move(value);
}

Array GradientMap::operator[](const Var & param) const {
    auto it = grads_.find(param.id());
    if (it == grads_.end()) return Array::zeros(param.shape());
    return it->second;
}

bool GradientMap::contains(const Var & param) const { return grads_.count(param.id()) != 0; }

GradientMap backward(const Var & root) {
    STREAMHEAD_REQUIRE(root.value().size() == 1, "backward root must be scalar, got " + shape_str(root.shape()));
    GradientMap out;
    if (!root.requires_grad()) return out;

    // iterative post-order DFS over grad-carrying nodes
    std::vector<Node *> order;
    std::unordered_map<const Node *, std::size_t> index;
    std::vector<std::pair<Node *, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    index.emplace(root.node().get(), SIZE_MAX);
    while (!stack.empty()) {
        auto & [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node * p = node->parents[next++].get();
            if (p->requires_grad && index.emplace(p, SIZE_MAX).second) stack.emplace_back(p, 0);
            continue;
        }
        index[node] = order.size();
        order.push_back(node);
        stack.pop_back();
    }

    std::vector<Array> grads(order.size());
    std::vector<bool> has(order.size(), false);
    grads.back() = Array::full(root.shape(), 1.0);
    has.back() = true;

    std::vector<Array *> pg;
    for (std::size_t i = order.size(); i-- > 0;) {
        Node * node = order[i];
        if (!has[i]) continue;
        if (node->parents.empty()) {
            out.set(node, std::move(grads[i]));
            continue;
        }
        pg.assign(node->parents.size(), nullptr);
        for (std::size_t j = 0; j < node->parents.size(); ++j) {
            Node * p = node->parents[j].get();
            if (!p->requires_grad) continue;
            const std::size_t pi = index.at(p);
            if (!has[pi]) {
                grads[pi] = Array::zeros(p->value.shape());
                has[pi] = true;
            }
            pg[j] = &grads[pi];
        }
        node->backward_fn(*node, grads[i], pg);
        grads[i] = Array();
    }
    return out;
}

Var detach(const Var & x) {
    auto node = std::make_shared<Node>();
    node->value = x.value();
    node->detached = true;
    return Var(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(detail::t_grad_enabled) { detail::t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { detail::t_grad_enabled = previous_; }

bool grad_enabled() { return detail::t_grad_enabled; }

std::size_t GraphStats::live() { return detail::g_live.load(); }
std::size_t GraphStats::peak() { return detail::g_peak.load(); }
void GraphStats::reset_peak() { detail::g_peak.store(detail::g_live.load()); }

Var add(const Var & a, const Var & b) {
    require_same_shape(a, b, "add");
    Array out = a.value();
    accumulate(&out, b.value());
    return make_op(std::move(out), {a, b}, [](const Node &, const Array & g, std::span<Array *> pg) {
        accumulate(pg[0], g);
        accumulate(pg[1], g);
    });
}

Var sub(const Var & a, const Var & b) {
    require_same_shape(a, b, "sub");
    Array out = a.value();
    auto o = out.data();
    auto bv = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
    return make_op(std::move(out), {a, b}, [](const Node &, const Array & g, std::span<Array *> pg) {
        accumulate(pg[0], g);
        if (pg[1]) {
            auto d = pg[1]->data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g[i];
        }
    });
}

Var mul(const Var & a, const Var & b) {
    require_same_shape(a, b, "mul");
    Array out = a.value();
    auto o = out.data();
    auto bv = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
    return make_op(std::move(out), {a, b}, [](const Node & self, const Array & g, std::span<Array *> pg) {
        const Array & av = self.parents[0]->value;
        const Array & bv = self.parents[1]->value;
        if (pg[0]) {
            auto d = pg[0]->data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * bv[i];
        }
        if (pg[1]) {
            auto d = pg[1]->data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * av[i];
        }
    });
}

Var add_scalar(const Var & a, double s) {
    return make_op(map_values(a.value(), [s](double v) { return v + s; }), {a},
                   [](const Node &, const Array & g, std::span<Array *> pg) { accumulate(pg[0], g); });
}

Var scale(const Var & a, double s) {
    return make_op(map_values(a.value(), [s](double v) { return v * s; }), {a},
                   [s](const Node &, const Array & g, std::span<Array *> pg) {
                       auto d = pg[0]->data();
                       for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * s;
                   });
}

Var neg(const Var & a) { return scale(a, -1.0); }

Var square(const Var & a) {
    return make_op(map_values(a.value(), [](double v) { return v * v; }), {a},
                   [](const Node & self, const Array & g, std::span<Array *> pg) {
                       const Array & av = self.parents[0]->value;
                       auto d = pg[0]->data();
                       for (std::size_t i = 0; i < d.size(); ++i) d[i] += 2.0 * av[i] * g[i];
                   });
}

Var silu(const Var & a) {
    return make_op(map_values(a.value(), [](double v) { return v * sigmoid(v); }), {a},
                   [](const Node & self, const Array & g, std::span<Array *> pg) {
                       const Array & av = self.parents[0]->value;
                       auto d = pg[0]->data();
                       for (std::size_t i = 0; i < d.size(); ++i) {
                           const double s = sigmoid(av[i]);
                           d[i] += g[i] * s * (1.0 + av[i] * (1.0 - s));
                       }
                   });
}

Var tanh(const Var & a) {
    return make_op(map_values(a.value(), [](double v) { return std::tanh(v); }), {a},
                   [](const Node & self, const Array & g, std::span<Array *> pg) {
                       const Array & y = self.value;
                       auto d = pg[0]->data();
                       for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
                   });
}

Var matmul(const Var & a, const Var & b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    STREAMHEAD_REQUIRE(b.shape()[0] == k, "matmul: inner dimensions " + shape_str(a.shape()) + " x " +
                                              shape_str(b.shape()));
    Array out(Shape{m, n});
    {
        const double * A = a.value().data().data();
        const double * B = b.value().data().data();
        double * C = out.data().data();
        for (std::size_t i = 0; i < m; ++i) {
            double * crow = C + i * n;
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = A[i * k + p];
                const double * brow = B + p * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
            }
        }
    }
    return make_op(std::move(out), {a, b}, [m, k, n](const Node & self, const Array & g, std::span<Array *> pg) {
        const double * A = self.parents[0]->value.data().data();
        const double * B = self.parents[1]->value.data().data();
        const double * G = g.data().data();
        if (pg[0]) {
            // dA = G B^T
            double * dA = pg[0]->data().data();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const double * brow = B + p * n;
                    const double * grow = G + i * n;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    dA[i * k + p] += acc;
                }
            }
        }
        if (pg[1]) {
            // dB = A^T G
            double * dB = pg[1]->data().data();
            for (std::size_t i = 0; i < m; ++i) {
                const double * grow = G + i * n;
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = A[i * k + p];
                    double * drow = dB + p * n;
                    for (std::size_t j = 0; j < n; ++j) drow[j] += aip * grow[j];
                }
            }
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    STREAMHEAD_REQUIRE(!parts.empty(), "concat_cols: no parts");
    const std::size_t m = parts[0].shape().at(0);
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto & p : parts) {
        require_rank2(p, "concat_cols");
        STREAMHEAD_REQUIRE(p.shape()[0] == m, "concat_cols: row counts differ");
        widths.push_back(p.shape()[1]);
        total += p.shape()[1];
    }
    Array out(Shape{m, total});
    std::size_t off = 0;
    for (std::size_t q = 0; q < parts.size(); ++q) {
        const Array & v = parts[q].value();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < widths[q]; ++j) out.at(i, off + j) = v.at(i, j);
        }
        off += widths[q];
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return make_op(std::move(out), std::move(ps),
                   [m, total, widths](const Node &, const Array & g, std::span<Array *> pg) {
                       std::size_t o = 0;
                       for (std::size_t q = 0; q < widths.size(); ++q) {
                           if (pg[q]) {
                               for (std::size_t i = 0; i < m; ++i) {
                                   for (std::size_t j = 0; j < widths[q]; ++j) pg[q]->at(i, j) += g[i * total + o + j];
                               }
                           }
                           o += widths[q];
                       }
                   });
}

Var concat_rows(std::span<const Var> parts) {
    std::vector<Array> values;
    values.reserve(parts.size());
    for (const auto & p : parts) values.push_back(p.value());
    Array out = concat_rows(std::span<const Array>(values));
    std::vector<std::size_t> sizes;
    for (const auto & v : values) sizes.push_back(v.size());
    std::vector<Var> ps(parts.begin(), parts.end());
    return make_op(std::move(out), std::move(ps), [sizes](const Node &, const Array & g, std::span<Array *> pg) {
        std::size_t o = 0;
        for (std::size_t q = 0; q < sizes.size(); ++q) {
            if (pg[q]) {
                auto d = pg[q]->data();
                for (std::size_t i = 0; i < sizes[q]; ++i) d[i] += g[o + i];
            }
            o += sizes[q];
        }
    });
}

Var slice_rows(const Var & a, std::size_t begin, std::size_t end) {
    Array out = a.value().rows(begin, end);
    const std::size_t offset = a.shape()[0] == 0 ? 0 : begin * (a.value().size() / a.shape()[0]);
    return make_op(std::move(out), {a}, [offset](const Node &, const Array & g, std::span<Array *> pg) {
        auto d = pg[0]->data();
        for (std::size_t i = 0; i < g.size(); ++i) d[offset + i] += g[i];
    });
}

Var slice_cols(const Var & a, std::size_t begin, std::size_t end) {
    require_rank2(a, "slice_cols");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    STREAMHEAD_REQUIRE(begin <= end && end <= n, "slice_cols: column range out of bounds");
    const std::size_t w = end - begin;
    Array out(Shape{m, w});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < w; ++j) out.at(i, j) = a.value().at(i, begin + j);
    }
    return make_op(std::move(out), {a}, [m, n, w, begin](const Node &, const Array & g, std::span<Array *> pg) {
        auto d = pg[0]->data();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < w; ++j) d[i * n + begin + j] += g[i * w + j];
        }
    });
}

Var mean_rows(const Var & a) {
    require_rank2(a, "mean_rows");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    STREAMHEAD_REQUIRE(m > 0, "mean_rows: no rows");
    Array out(Shape{1, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[j] += a.value().at(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) out[j] /= static_cast<double>(m);
    return make_op(std::move(out), {a}, [m, n](const Node &, const Array & g, std::span<Array *> pg) {
        const double inv = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) pg[0]->at(i, j) += g[j] * inv;
        }
    });
}

Var repeat_rows(const Var & row, std::size_t m) {
    const Array & v = row.value();
    STREAMHEAD_REQUIRE(v.rank() == 1 || (v.rank() == 2 && v.dim(0) == 1), "repeat_rows: expected (n) or (1, n)");
    const std::size_t n = v.size();
    Array out(Shape{m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = v[j];
    }
    return make_op(std::move(out), {row}, [m, n](const Node &, const Array & g, std::span<Array *> pg) {
        auto d = pg[0]->data();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) d[j] += g[i * n + j];
        }
    });
}

Var reshape(const Var & a, Shape shape) {
    Array out = a.value().reshaped(std::move(shape));
    return make_op(std::move(out), {a}, [](const Node &, const Array & g, std::span<Array *> pg) {
        auto d = pg[0]->data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    });
}

Var sum(const Var & a) {
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return make_op(Array::scalar(s), {a}, [](const Node &, const Array & g, std::span<Array *> pg) {
        const double gv = g[0];
        for (double & d : pg[0]->data()) d += gv;
    });
}

Var mean(const Var & a) {
    STREAMHEAD_REQUIRE(a.value().size() > 0, "mean of empty array");
    return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var sum_squares(const Var & a) { return sum(square(a)); }

Var mse(const Var & a, const Var & b) { return mean(square(sub(a, b))); }

} // namespace streamhead::numerics
