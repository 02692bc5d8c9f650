#include "hoi/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "hoi/errors.hpp"

namespace hoi {

namespace {

std::atomic<uint64_t> g_next_node_id{1};

thread_local detail::SgFreeze* g_sg_freeze = nullptr;

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
    for (int d : shape) {
        if (d <= 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
    }
}

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> data, bool requires_grad,
                                std::vector<std::shared_ptr<Node>> parents) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    node->id = g_next_node_id.fetch_add(1);
    node->parents = std::move(parents);
    return node;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                             " vs " + shape_string(b.shape()));
    }
}

void require_rank2(const Tensor& a, const char* op) {
    if (a.rank() != 2) {
        throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " + shape_string(a.shape()));
    }
}

void axpy(std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Rows of the trailing dimension: total = outer * width.
std::pair<int64_t, int64_t> lastdim_split(const Shape& shape) {
    const int64_t width = shape.back();
    return {shape_numel(shape) / width, width};
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

std::vector<double>& GradStore::slot(const Node& node) {
    auto it = grads.find(node.id);
    if (it == grads.end()) {
        it = grads.emplace(node.id, std::vector<double>(node.data.size(), 0.0)).first;
    }
    return it->second;
}

const std::vector<double>* GradStore::find(uint64_t id) const {
    auto it = grads.find(id);
    return it == grads.end() ? nullptr : &it->second;
}

Tensor wrap_node(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    validate_shape(shape);
    if (static_cast<int64_t>(data.size()) != shape_numel(shape)) {
        throw DimensionError("from_data: " + std::to_string(data.size()) + " values for shape " +
                             shape_string(shape));
    }
    return wrap_node(make_node(std::move(shape), std::move(data), requires_grad, {}));
}

Tensor Tensor::constant(Shape shape, double value) {
    validate_shape(shape);
    std::vector<double> data(shape_numel(shape), value);
    return wrap_node(make_node(std::move(shape), std::move(data), false, {}));
}

Tensor Tensor::zeros(Shape shape) { return constant(std::move(shape), 0.0); }

const Shape& Tensor::shape() const { return node_->shape; }
int Tensor::rank() const { return static_cast<int>(node_->shape.size()); }
int Tensor::dim(int i) const { return node_->shape[i]; }
int64_t Tensor::numel() const { return static_cast<int64_t>(node_->data.size()); }
const std::vector<double>& Tensor::data() const { return node_->data; }

double Tensor::item() const {
    if (numel() != 1) throw DimensionError("item: tensor has shape " + shape_string(shape()));
    return node_->data[0];
}

double Tensor::at(int row, int col) const {
    if (rank() != 2) throw DimensionError("at: tensor has shape " + shape_string(shape()));
    return node_->data[static_cast<std::size_t>(row) * dim(1) + col];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->parents.empty() && !node_->backward; }
uint64_t Tensor::id() const { return node_->id; }

void Tensor::set_data(std::vector<double> values) const {
    if (!is_leaf()) throw ConfigError("set_data: only leaf tensors may be updated in place");
    if (values.size() != node_->data.size()) {
        throw DimensionError("set_data: " + std::to_string(values.size()) + " values for shape " +
                             shape_string(shape()));
    }
    node_->data = std::move(values);
}

bool GradientMap::contains(const Tensor& t) const { return entries.count(t.id()) != 0; }

const std::vector<double>& GradientMap::at(const Tensor& t) const {
    auto it = entries.find(t.id());
    if (it == entries.end()) throw ConfigError("GradientMap: no entry for node " + std::to_string(t.id()));
    return it->second;
}

std::vector<double> GradientMap::get_or_zeros(const Tensor& t) const {
    auto it = entries.find(t.id());
    if (it == entries.end()) return std::vector<double>(t.numel(), 0.0);
    return it->second;
}

GradientMap backward(const Tensor& loss) {
    if (!loss.defined()) throw ConfigError("backward: undefined tensor");
    if (loss.numel() != 1) {
        throw DimensionError("backward: loss must be scalar, got " + shape_string(loss.shape()));
    }
    GradientMap out;
    if (!loss.requires_grad()) return out;

    // Collect every reachable node that requires grad; constants prune traversal.
    std::vector<Node*> order;
    std::unordered_set<uint64_t> seen;
    std::vector<Node*> stack{loss.node().get()};
    seen.insert(loss.id());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p->id).second) stack.push_back(p.get());
        }
    }
    std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->id > b->id; });

    GradStore store;
    store.grads.emplace(loss.id(), std::vector<double>{1.0});
    for (Node* n : order) {
        const std::vector<double>* g = store.find(n->id);
        if (g == nullptr || !n->backward) continue;
        n->backward(*g, store);
    }
    out.entries = std::move(store.grads);
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise operations
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto node = make_node(a.shape(), std::move(out), a.requires_grad() || b.requires_grad(),
                          {a.node(), b.node()});
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    node->backward = [pa, pb](const std::vector<double>& g, GradStore& store) {
        if (pa->requires_grad) axpy(store.slot(*pa), g);
        if (pb->requires_grad) axpy(store.slot(*pb), g);
    };
    return wrap_node(node);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = a.data()[i] - b.data()[i];
    auto node = make_node(a.shape(), std::move(out), a.requires_grad() || b.requires_grad(),
                          {a.node(), b.node()});
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    node->backward = [pa, pb](const std::vector<double>& g, GradStore& store) {
        if (pa->requires_grad) axpy(store.slot(*pa), g);
        if (pb->requires_grad) {
            auto& slot = store.slot(*pb);
            for (std::size_t i = 0; i < g.size(); ++i) slot[i] -= g[i];
        }
    };
    return wrap_node(node);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto node = make_node(a.shape(), std::move(out), a.requires_grad() || b.requires_grad(),
                          {a.node(), b.node()});
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    node->backward = [pa, pb](const std::vector<double>& g, GradStore& store) {
        if (pa->requires_grad) {
            auto& slot = store.slot(*pa);
            for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * pb->data[i];
        }
        if (pb->requires_grad) {
            auto& slot = store.slot(*pb);
            for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * pa->data[i];
        }
    };
    return wrap_node(node);
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "div");
    std::vector<double> out(a.numel());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = a.data()[i] / b.data()[i];
    auto node = make_node(a.shape(), std::move(out), a.requires_grad() || b.requires_grad(),
                          {a.node(), b.node()});
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    std::vector<double> quotient = node->data;
    node->backward = [pa, pb, quotient](const std::vector<double>& g, GradStore& store) {
        if (pa->requires_grad) {
            auto& slot = store.slot(*pa);
            for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] / pb->data[i];
        }
        if (pb->requires_grad) {
            auto& slot = store.slot(*pb);
            for (std::size_t i = 0; i < g.size(); ++i) slot[i] -= g[i] * quotient[i] / pb->data[i];
        }
    };
    return wrap_node(node);
}

Tensor scalar_mul(const Tensor& a, double s) {
    std::vector<double> out(a.numel());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = a.data()[i] * s;
    auto node = make_node(a.shape(), std::move(out), a.requires_grad(), {a.node()});
    Node* pa = a.node().get();
    node->backward = [pa, s](const std::vector<double>& g, GradStore& store) {
        if (!pa->requires_grad) return;
        auto& slot = store.slot(*pa);
        for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * s;
    };
    return wrap_node(node);
}

Tensor add_const(const Tensor& a, double c) {
    std::vector<double> out(a.numel());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = a.data()[i] + c;
    auto node = make_node(a.shape(), std::move(out), a.requires_grad(), {a.node()});
    Node* pa = a.node().get();
    node->backward = [pa](const std::vector<double>& g, GradStore& store) {
        if (pa->requires_grad) axpy(store.slot(*pa), g);
    };
    return wrap_node(node);
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    auto node = make_node(a.shape(), std::move(out), a.requires_grad(), {a.node()});
    Node* pa = a.node().get();
    node->backward = [pa](const std::vector<double>& g, GradStore& store) {
        if (!pa->requires_grad) return;
        auto& slot = store.slot(*pa);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (pa->data[i] > 0.0) slot[i] += g[i];
        }
    };
    return wrap_node(node);
}

Tensor abs(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = std::fabs(a.data()[i]);
    auto node = make_node(a.shape(), std::move(out), a.requires_grad(), {a.node()});
    Node* pa = a.node().get();
    node->backward = [pa](const std::vector<double>& g, GradStore& store) {
        if (!pa->requires_grad) return;
        auto& slot = store.slot(*pa);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = pa->data[i];
            if (x > 0.0) slot[i] += g[i];
            else if (x < 0.0) slot[i] -= g[i];
        }
    };
    return wrap_node(node);
}

Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = stable_sigmoid(a.data()[i]);
    auto node = make_node(a.shape(), std::move(out), a.requires_grad(), {a.node()});
    Node* pa = a.node().get();
    std::vector<double> y = node->data;
    node->backward = [pa, y](const std::vector<double>& g, GradStore& store) {
        if (!pa->requires_grad) return;
        auto& slot = store.slot(*pa);
        for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * y[i] * (1.0 - y[i]);
    };
    return wrap_node(node);
}

Tensor log(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (int64_t i = 0; i < a.numel(); ++i) out[i] = std::log(a.data()[i]);
    auto node = make_node(a.shape(), std::move(out), a.requires_grad(), {a.node()});
    Node* pa = a.node().get();
    node->backward = [pa](const std::vector<double>& g, GradStore& store) {
        if (!pa->requires_grad) return;
        auto& slot = store.slot(*pa);
        for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] / pa->data[i];
    };
    return wrap_node(node);
}

Tensor softplus(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (int64_t i = 0; i < a.numel(); ++i) {
        const double x = a.data()[i];
        out[i] = std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
    }
    auto node = make_node(a.shape(), std::move(out), a.requires_grad(), {a.node()});
    Node* pa = a.node().get();
    node->backward = [pa](const std::vector<double>& g, GradStore& store) {
        if (!pa->requires_grad) return;
        auto& slot = store.slot(*pa);
        for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * stable_sigmoid(pa->data[i]);
    };
    return wrap_node(node);
}

// ---------------------------------------------------------------------------
// Rank-2 structural operations
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    if (a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a.shape()) +
                             " vs " + shape_string(b.shape()));
    }
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    const double* A = a.data().data();
    const double* B = b.data().data();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double av = A[static_cast<std::size_t>(i) * k + p];
            double* orow = out.data() + static_cast<std::size_t>(i) * n;
            const double* brow = B + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    auto node = make_node({m, n}, std::move(out), a.requires_grad() || b.requires_grad(),
                          {a.node(), b.node()});
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    node->backward = [pa, pb, m, k, n](const std::vector<double>& g, GradStore& store) {
        if (pa->requires_grad) {
            // dA += g . B^T
            auto& slot = store.slot(*pa);
            for (int i = 0; i < m; ++i) {
                for (int p = 0; p < k; ++p) {
                    double acc = 0.0;
                    const double* grow = g.data() + static_cast<std::size_t>(i) * n;
                    const double* brow = pb->data.data() + static_cast<std::size_t>(p) * n;
                    for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    slot[static_cast<std::size_t>(i) * k + p] += acc;
                }
            }
        }
        if (pb->requires_grad) {
            // dB += A^T . g
            auto& slot = store.slot(*pb);
            for (int i = 0; i < m; ++i) {
                const double* arow = pa->data.data() + static_cast<std::size_t>(i) * k;
                const double* grow = g.data() + static_cast<std::size_t>(i) * n;
                for (int p = 0; p < k; ++p) {
                    const double av = arow[p];
                    double* srow = slot.data() + static_cast<std::size_t>(p) * n;
                    for (int j = 0; j < n; ++j) srow[j] += av * grow[j];
                }
            }
        }
    };
    return wrap_node(node);
}

Tensor transpose(const Tensor& a) {
    require_rank2(a, "transpose");
    const int m = a.dim(0), n = a.dim(1);
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j) * m + i] = a.data()[static_cast<std::size_t>(i) * n + j];
    auto node = make_node({n, m}, std::move(out), a.requires_grad(), {a.node()});
    Node* pa = a.node().get();
    node->backward = [pa, m, n](const std::vector<double>& g, GradStore& store) {
        if (!pa->requires_grad) return;
        auto& slot = store.slot(*pa);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < m; ++i)
                slot[static_cast<std::size_t>(i) * n + j] += g[static_cast<std::size_t>(j) * m + i];
    };
    return wrap_node(node);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: empty input list");
    const int rows = parts[0].dim(0);
    int total_cols = 0;
    bool needs_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    for (const Tensor& t : parts) {
        require_rank2(t, "concat_cols");
        if (t.dim(0) != rows) {
            throw DimensionError("concat_cols: row mismatch " + shape_string(parts[0].shape()) +
                                 " vs " + shape_string(t.shape()));
        }
        total_cols += t.dim(1);
        needs_grad = needs_grad || t.requires_grad();
        parents.push_back(t.node());
    }
    std::vector<double> out(static_cast<std::size_t>(rows) * total_cols);
    int col0 = 0;
    for (const Tensor& t : parts) {
        const int cols = t.dim(1);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                out[static_cast<std::size_t>(i) * total_cols + col0 + j] =
                    t.data()[static_cast<std::size_t>(i) * cols + j];
        col0 += cols;
    }
    auto node = make_node({rows, total_cols}, std::move(out), needs_grad, std::move(parents));
    std::vector<Node*> raw;
    for (const auto& p : node->parents) raw.push_back(p.get());
    node->backward = [raw, rows, total_cols](const std::vector<double>& g, GradStore& store) {
        int col0 = 0;
        for (Node* p : raw) {
            const int cols = p->shape[1];
            if (p->requires_grad) {
                auto& slot = store.slot(*p);
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j)
                        slot[static_cast<std::size_t>(i) * cols + j] +=
                            g[static_cast<std::size_t>(i) * total_cols + col0 + j];
            }
            col0 += cols;
        }
    };
    return wrap_node(node);
}

Tensor slice(const Tensor& a, int row0, int rows, int col0, int cols) {
    require_rank2(a, "slice");
    const int m = a.dim(0), n = a.dim(1);
    if (row0 < 0 || rows < 1 || row0 + rows > m || col0 < 0 || cols < 1 || col0 + cols > n) {
        throw DimensionError("slice: window [" + std::to_string(row0) + "+" + std::to_string(rows) +
                             ", " + std::to_string(col0) + "+" + std::to_string(cols) +
                             "] out of bounds for " + shape_string(a.shape()));
    }
    std::vector<double> out(static_cast<std::size_t>(rows) * cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            out[static_cast<std::size_t>(i) * cols + j] =
                a.data()[static_cast<std::size_t>(row0 + i) * n + col0 + j];
    auto node = make_node({rows, cols}, std::move(out), a.requires_grad(), {a.node()});
    Node* pa = a.node().get();
    node->backward = [pa, row0, col0, rows, cols, n](const std::vector<double>& g, GradStore& store) {
        if (!pa->requires_grad) return;
        auto& slot = store.slot(*pa);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                slot[static_cast<std::size_t>(row0 + i) * n + col0 + j] +=
                    g[static_cast<std::size_t>(i) * cols + j];
    };
    return wrap_node(node);
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
    require_rank2(a, "add_bias");
    if (bias.rank() != 1 || bias.dim(0) != a.dim(1)) {
        throw DimensionError("add_bias: bias " + shape_string(bias.shape()) + " for matrix " +
                             shape_string(a.shape()));
    }
    const int m = a.dim(0), n = a.dim(1);
    std::vector<double> out(a.data());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] += bias.data()[j];
    auto node = make_node(a.shape(), std::move(out), a.requires_grad() || bias.requires_grad(),
                          {a.node(), bias.node()});
    Node* pa = a.node().get();
    Node* pb = bias.node().get();
    node->backward = [pa, pb, m, n](const std::vector<double>& g, GradStore& store) {
        if (pa->requires_grad) axpy(store.slot(*pa), g);
        if (pb->requires_grad) {
            auto& slot = store.slot(*pb);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) slot[j] += g[static_cast<std::size_t>(i) * n + j];
        }
    };
    return wrap_node(node);
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    auto node = make_node({1}, {acc}, a.requires_grad(), {a.node()});
    Node* pa = a.node().get();
    node->backward = [pa](const std::vector<double>& g, GradStore& store) {
        if (!pa->requires_grad) return;
        auto& slot = store.slot(*pa);
        for (double& v : slot) v += g[0];
    };
    return wrap_node(node);
}

Tensor mean(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    const double inv = 1.0 / static_cast<double>(a.numel());
    auto node = make_node({1}, {acc * inv}, a.requires_grad(), {a.node()});
    Node* pa = a.node().get();
    node->backward = [pa, inv](const std::vector<double>& g, GradStore& store) {
        if (!pa->requires_grad) return;
        auto& slot = store.slot(*pa);
        for (double& v : slot) v += g[0] * inv;
    };
    return wrap_node(node);
}

// ---------------------------------------------------------------------------
// Last-dimension operations
// ---------------------------------------------------------------------------

Tensor softmax_lastdim(const Tensor& a) {
    const auto [outer, width] = lastdim_split(a.shape());
    std::vector<double> out(a.numel());
    for (int64_t r = 0; r < outer; ++r) {
        const double* x = a.data().data() + r * width;
        double* y = out.data() + r * width;
        double mx = x[0];
        for (int64_t j = 1; j < width; ++j) mx = std::max(mx, x[j]);
        double denom = 0.0;
        for (int64_t j = 0; j < width; ++j) {
            y[j] = std::exp(x[j] - mx);
            denom += y[j];
        }
        for (int64_t j = 0; j < width; ++j) y[j] /= denom;
    }
    auto node = make_node(a.shape(), std::move(out), a.requires_grad(), {a.node()});
    Node* pa = a.node().get();
    std::vector<double> y = node->data;
    const int64_t o = outer, w = width;
    node->backward = [pa, y, o, w](const std::vector<double>& g, GradStore& store) {
        if (!pa->requires_grad) return;
        auto& slot = store.slot(*pa);
        for (int64_t r = 0; r < o; ++r) {
            const double* yr = y.data() + r * w;
            const double* gr = g.data() + r * w;
            double dot = 0.0;
            for (int64_t j = 0; j < w; ++j) dot += gr[j] * yr[j];
            for (int64_t j = 0; j < w; ++j) slot[r * w + j] += yr[j] * (gr[j] - dot);
        }
    };
    return wrap_node(node);
}

Tensor logsumexp_lastdim(const Tensor& a) {
    const auto [outer, width] = lastdim_split(a.shape());
    Shape out_shape = a.shape();
    out_shape.back() = 1;
    std::vector<double> out(outer);
    for (int64_t r = 0; r < outer; ++r) {
        const double* x = a.data().data() + r * width;
        double mx = x[0];
        for (int64_t j = 1; j < width; ++j) mx = std::max(mx, x[j]);
        double acc = 0.0;
        for (int64_t j = 0; j < width; ++j) acc += std::exp(x[j] - mx);
        out[r] = mx + std::log(acc);
    }
    auto node = make_node(std::move(out_shape), std::move(out), a.requires_grad(), {a.node()});
    Node* pa = a.node().get();
    std::vector<double> lse = node->data;
    const int64_t o = outer, w = width;
    node->backward = [pa, lse, o, w](const std::vector<double>& g, GradStore& store) {
        if (!pa->requires_grad) return;
        auto& slot = store.slot(*pa);
        for (int64_t r = 0; r < o; ++r) {
            const double* x = pa->data.data() + r * w;
            for (int64_t j = 0; j < w; ++j) slot[r * w + j] += g[r] * std::exp(x[j] - lse[r]);
        }
    };
    return wrap_node(node);
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
    if (eps <= 0.0) throw ParameterError("layer_norm: eps must be positive, got " + std::to_string(eps));
    const auto [outer, width] = lastdim_split(a.shape());
    if (gain.rank() != 1 || gain.dim(0) != width || bias.rank() != 1 || bias.dim(0) != width) {
        throw DimensionError("layer_norm: gain " + shape_string(gain.shape()) + ", bias " +
                             shape_string(bias.shape()) + " for input " + shape_string(a.shape()));
    }
    std::vector<double> out(a.numel());
    std::vector<double> xhat(a.numel());
    std::vector<double> inv_sigma(outer);
    for (int64_t r = 0; r < outer; ++r) {
        const double* x = a.data().data() + r * width;
        double mu = 0.0;
        for (int64_t j = 0; j < width; ++j) mu += x[j];
        mu /= static_cast<double>(width);
        double var = 0.0;
        for (int64_t j = 0; j < width; ++j) {
            const double d = x[j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(width);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_sigma[r] = inv;
        for (int64_t j = 0; j < width; ++j) {
            const double xh = (x[j] - mu) * inv;
            xhat[r * width + j] = xh;
            out[r * width + j] = gain.data()[j] * xh + bias.data()[j];
        }
    }
    auto node = make_node(a.shape(), std::move(out),
                          a.requires_grad() || gain.requires_grad() || bias.requires_grad(),
                          {a.node(), gain.node(), bias.node()});
    Node* pa = a.node().get();
    Node* pg = gain.node().get();
    Node* pb = bias.node().get();
    const int64_t o = outer, w = width;
    node->backward = [pa, pg, pb, xhat, inv_sigma, o, w](const std::vector<double>& g, GradStore& store) {
        if (pa->requires_grad) {
            auto& slot = store.slot(*pa);
            for (int64_t r = 0; r < o; ++r) {
                const double* xh = xhat.data() + r * w;
                const double* gr = g.data() + r * w;
                double mean_dy = 0.0, mean_dy_xhat = 0.0;
                for (int64_t j = 0; j < w; ++j) {
                    const double dy = gr[j] * pg->data[j];
                    mean_dy += dy;
                    mean_dy_xhat += dy * xh[j];
                }
                mean_dy /= static_cast<double>(w);
                mean_dy_xhat /= static_cast<double>(w);
                for (int64_t j = 0; j < w; ++j) {
                    const double dy = gr[j] * pg->data[j];
                    slot[r * w + j] += (dy - mean_dy - xh[j] * mean_dy_xhat) * inv_sigma[r];
                }
            }
        }
        if (pg->requires_grad) {
            auto& slot = store.slot(*pg);
            for (int64_t r = 0; r < o; ++r)
                for (int64_t j = 0; j < w; ++j) slot[j] += g[r * w + j] * xhat[r * w + j];
        }
        if (pb->requires_grad) {
            auto& slot = store.slot(*pb);
            for (int64_t r = 0; r < o; ++r)
                for (int64_t j = 0; j < w; ++j) slot[j] += g[r * w + j];
        }
    };
    return wrap_node(node);
}

Tensor stop_gradient(const Tensor& a) {
    std::vector<double> values;
    if (g_sg_freeze != nullptr && g_sg_freeze->mode == detail::SgFreeze::Mode::Replay) {
        if (g_sg_freeze->cursor >= g_sg_freeze->values.size()) {
            throw DeterminismError("stop_gradient: replay ran past the recorded sequence");
        }
        values = g_sg_freeze->values[g_sg_freeze->cursor++];
        if (static_cast<int64_t>(values.size()) != a.numel()) {
            throw DeterminismError("stop_gradient: replayed value has wrong size");
        }
    } else {
        values = a.data();
        if (g_sg_freeze != nullptr) g_sg_freeze->values.push_back(values);
    }
    // Constant node: no parents, so backward sweeps never cross it.
    return wrap_node(make_node(a.shape(), std::move(values), false, {}));
}

namespace detail {

SgFreezeScope::SgFreezeScope(SgFreeze* ctx) : previous_(g_sg_freeze) { g_sg_freeze = ctx; }
SgFreezeScope::~SgFreezeScope() { g_sg_freeze = previous_; }

}  // namespace detail

}  // namespace hoi
