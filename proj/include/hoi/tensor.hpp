#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace hoi {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct GradStore;

// One value in the computation graph. Nodes are created by operations, never
// mutated afterwards (leaf data may be overwritten between graphs via
// Tensor::set_data). Parents always carry smaller ids than children, so a
// descending-id sweep is a valid reverse-topological order.
struct Node {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    uint64_t id = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(const std::vector<double>&, GradStore&)> backward;
};

// Deterministic gradient accumulator used during a backward sweep.
struct GradStore {
    std::map<uint64_t, std::vector<double>> grads;
    std::vector<double>& slot(const Node& node);
    const std::vector<double>* find(uint64_t id) const;
};

struct NamedParam;

class Tensor {
public:
    Tensor() = default;

    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor constant(Shape shape, double value);
    static Tensor zeros(Shape shape);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int rank() const;
    int dim(int i) const;
    int64_t numel() const;
    const std::vector<double>& data() const;
    double item() const;
    double at(int row, int col) const;
    bool requires_grad() const;
    bool is_leaf() const;
    uint64_t id() const;

    // Leaf-only in-place update, used by optimizers and finite differencing
    // between graphs. Rejected for nodes that were produced by an operation.
    // Tensors are shared handles, so this mutates the pointee, not the handle.
    void set_data(std::vector<double> values) const;

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;

    friend Tensor wrap_node(std::shared_ptr<Node> node);
};

// A tensor with a stable registry name (parameters, gradcheck inputs).
struct NamedParam {
    std::string name;
    Tensor tensor;
};

// Gradients keyed by node id. Entries exist for every requires_grad node the
// backward sweep reached; leaves the loss does not depend on stay absent.
class GradientMap {
public:
    bool contains(const Tensor& t) const;
    const std::vector<double>& at(const Tensor& t) const;
    std::vector<double> get_or_zeros(const Tensor& t) const;
    std::size_t size() const { return entries.size(); }

    std::map<uint64_t, std::vector<double>> entries;
};

// Reverse-mode sweep from a scalar loss. Deterministic: two calls on the same
// graph produce bit-identical maps. A loss with requires_grad == false yields
// an empty map.
GradientMap backward(const Tensor& loss);

// Elementwise ops (shapes must match exactly; no implicit broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
Tensor add_const(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);
Tensor softplus(const Tensor& a);

// Rank-2 structural ops.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice(const Tensor& a, int row0, int rows, int col0, int cols);
// Adds a length-d vector to every row of an [n x d] matrix.
Tensor add_bias(const Tensor& a, const Tensor& bias);

// Reductions to a [1] scalar.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Last-dimension ops (any rank; slices of the trailing dimension).
Tensor softmax_lastdim(const Tensor& a);
Tensor logsumexp_lastdim(const Tensor& a);
// Normalizes each trailing-dimension slice, then applies gain and bias.
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps);

// Identity forward; blocks gradient flow exactly (the output is a constant).
Tensor stop_gradient(const Tensor& a);

namespace detail {

// Freezing support used by finite differencing: while a freeze context is in
// replay mode, stop_gradient returns the values recorded at the base point so
// numeric derivatives see the same blocked paths the analytic sweep does.
struct SgFreeze {
    enum class Mode { Record, Replay };
    Mode mode = Mode::Record;
    std::vector<std::vector<double>> values;
    std::size_t cursor = 0;
};

class SgFreezeScope {
public:
    explicit SgFreezeScope(SgFreeze* ctx);
    ~SgFreezeScope();
    SgFreezeScope(const SgFreezeScope&) = delete;
    SgFreezeScope& operator=(const SgFreezeScope&) = delete;

private:
    SgFreeze* previous_;
};

}  // namespace detail

}  // namespace hoi
