#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsnet/ops.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet {

// Handle to a value recorded on a tape.
struct Value {
    int idx = -1;
    bool valid() const { return idx >= 0; }
};

// Define-by-run tape. Nodes are appended in execution order, so the reverse
// sweep visits them in reverse topological order by construction. A tape is
// built fresh for every forward pass and confined to one thread.
template <typename T>
class Tape {
public:
    enum class Op {
        leaf,
        conv2d,
        deconv2d,
        relu,
        sigmoid,
        maxpool2,
        upsample2,
        concat,
        add,
        mul,
        scale,
        add_scalar,
        divide,
        sum_all,
    };

    struct Node {
        Op op;
        int in[3] = {-1, -1, -1};
        BasicTensor<T> value;
        BasicTensor<T>* bound = nullptr;  // learnable leaf: grads accumulate here
        bool needs_grad = false;
        std::vector<std::int32_t> argmax;  // maxpool context
        double scalar = 0.0;               // scale / add_scalar context
        int p0 = 0, p1 = 0;                // padding / stride context
    };

    // Constant input; gradients do not flow past it.
    Value leaf(BasicTensor<T> t) {
        Node nd;
        nd.op = Op::leaf;
        nd.value = std::move(t);
        return push(std::move(nd));
    }

    // Learnable leaf. backward() accumulates d(loss)/d(param) into param.grad.
    Value param(BasicTensor<T>& p) {
        Node nd;
        nd.op = Op::leaf;
        nd.value = BasicTensor<T>(p.shape, p.data);  // snapshot values, not grads
        nd.bound = &p;
        nd.needs_grad = true;
        return push(std::move(nd));
    }

    const BasicTensor<T>& value(Value v) const { return node(v).value; }

    double scalar_value(Value v) const {
        const BasicTensor<T>& t = node(v).value;
        if (t.numel() != 1) throw ContractError("scalar_value: node is not scalar-shaped");
        return static_cast<double>(t.data[0]);
    }

    std::size_t size() const { return nodes_.size(); }

    Value conv2d(Value x, Value w, Value b, int pad) {
        Node nd;
        nd.op = Op::conv2d;
        nd.value = ops::conv2d_fwd(node(x).value, node(w).value,
                                   b.valid() ? node(b).value : BasicTensor<T>{}, pad);
        nd.p0 = pad;
        set_inputs(nd, x, w, b);
        return push(std::move(nd));
    }

    Value deconv2d(Value x, Value w, Value b, int stride, int pad) {
        Node nd;
        nd.op = Op::deconv2d;
        nd.value = ops::deconv2d_fwd(node(x).value, node(w).value,
                                     b.valid() ? node(b).value : BasicTensor<T>{}, stride, pad);
        nd.p0 = pad;
        nd.p1 = stride;
        set_inputs(nd, x, w, b);
        return push(std::move(nd));
    }

    Value relu(Value x) {
        Node nd;
        nd.op = Op::relu;
        nd.value = ops::relu_fwd(node(x).value);
        set_inputs(nd, x);
        return push(std::move(nd));
    }

    Value sigmoid(Value x) {
        Node nd;
        nd.op = Op::sigmoid;
        nd.value = ops::sigmoid_fwd(node(x).value);
        set_inputs(nd, x);
        return push(std::move(nd));
    }

    Value maxpool2(Value x) {
        Node nd;
        nd.op = Op::maxpool2;
        nd.value = ops::maxpool2_fwd(node(x).value, nd.argmax);
        set_inputs(nd, x);
        return push(std::move(nd));
    }

    Value upsample2(Value x) {
        Node nd;
        nd.op = Op::upsample2;
        nd.value = ops::upsample2_fwd(node(x).value);
        set_inputs(nd, x);
        return push(std::move(nd));
    }

    Value concat(Value a, Value b) {
        Node nd;
        nd.op = Op::concat;
        nd.value = ops::concat_fwd(node(a).value, node(b).value);
        set_inputs(nd, a, b);
        return push(std::move(nd));
    }

    Value add(Value a, Value b) {
        check_same_shape(node(a).value, node(b).value, "add");
        Node nd;
        nd.op = Op::add;
        nd.value = node(a).value;
        for (std::size_t i = 0; i < nd.value.data.size(); ++i)
            nd.value.data[i] += node(b).value.data[i];
        set_inputs(nd, a, b);
        return push(std::move(nd));
    }

    Value mul(Value a, Value b) {
        check_same_shape(node(a).value, node(b).value, "mul");
        Node nd;
        nd.op = Op::mul;
        nd.value = node(a).value;
        for (std::size_t i = 0; i < nd.value.data.size(); ++i)
            nd.value.data[i] *= node(b).value.data[i];
        set_inputs(nd, a, b);
        return push(std::move(nd));
    }

    Value scale(Value a, double s) {
        Node nd;
        nd.op = Op::scale;
        nd.value = node(a).value;
        for (T& v : nd.value.data) v = static_cast<T>(static_cast<double>(v) * s);
        nd.scalar = s;
        set_inputs(nd, a);
        return push(std::move(nd));
    }

    Value add_scalar(Value a, double c) {
        Node nd;
        nd.op = Op::add_scalar;
        nd.value = node(a).value;
        for (T& v : nd.value.data) v = static_cast<T>(static_cast<double>(v) + c);
        nd.scalar = c;
        set_inputs(nd, a);
        return push(std::move(nd));
    }

    Value divide(Value a, Value b) {
        check_same_shape(node(a).value, node(b).value, "divide");
        Node nd;
        nd.op = Op::divide;
        nd.value = node(a).value;
        for (std::size_t i = 0; i < nd.value.data.size(); ++i)
            nd.value.data[i] /= node(b).value.data[i];
        set_inputs(nd, a, b);
        return push(std::move(nd));
    }

    Value sum(Value x) {
        Node nd;
        nd.op = Op::sum_all;
        nd.value = BasicTensor<T>(Shape{1, 1, 1, 1});
        nd.value.data[0] = static_cast<T>(ops::sum_all(node(x).value));
        set_inputs(nd, x);
        return push(std::move(nd));
    }

    // Reverse sweep from `loss`. Populates grad on every bound (learnable)
    // leaf; leaves unreachable from the loss get zero grad. Repeated calls
    // accumulate into the parameter grads.
    void backward(Value loss) {
        const Node& ln = node(loss);
        if (ln.value.shape != Shape{1, 1, 1, 1})
            throw ContractError("backward: loss must be scalar-shaped (1,1,1,1), got " +
                                ln.value.shape.str());
        std::vector<BasicTensor<T>> grads(nodes_.size());
        std::vector<char> live(nodes_.size(), 0);
        grads[loss.idx] = BasicTensor<T>(Shape{1, 1, 1, 1}, T(1));
        live[loss.idx] = 1;
        for (int i = loss.idx; i >= 0; --i) {
            if (!live[i] || !nodes_[i].needs_grad) continue;
            propagate(i, grads, live);
        }
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            Node& nd = nodes_[i];
            if (!nd.bound) continue;
            nd.bound->ensure_grad();
            if (!live[i]) continue;
            const BasicTensor<T>& g = grads[i];
            for (std::size_t j = 0; j < g.data.size(); ++j) nd.bound->grad[j] += g.data[j];
        }
    }

private:
    std::vector<Node> nodes_;

    Value push(Node&& nd) {
        nodes_.push_back(std::move(nd));
        return Value{static_cast<int>(nodes_.size()) - 1};
    }

    const Node& node(Value v) const {
        if (!v.valid() || v.idx >= static_cast<int>(nodes_.size()))
            throw ContractError("tape: value handle does not belong to this tape");
        return nodes_[v.idx];
    }

    void set_inputs(Node& nd, Value a, Value b = {}, Value c = {}) {
        nd.in[0] = a.idx;
        nd.in[1] = b.idx;
        nd.in[2] = c.idx;
        for (int ix : nd.in)
            if (ix >= 0 && nodes_[ix].needs_grad) nd.needs_grad = true;
    }

    BasicTensor<T>* grad_for(int idx, std::vector<BasicTensor<T>>& grads,
                             std::vector<char>& live) {
        if (idx < 0 || !nodes_[idx].needs_grad) return nullptr;
        if (!live[idx]) {
            grads[idx] = BasicTensor<T>(nodes_[idx].value.shape);
            live[idx] = 1;
        }
        return &grads[idx];
    }

    void propagate(int i, std::vector<BasicTensor<T>>& grads, std::vector<char>& live) {
        Node& nd = nodes_[i];
        const BasicTensor<T>& g = grads[i];
        switch (nd.op) {
            case Op::leaf:
                break;
            case Op::conv2d: {
                BasicTensor<T>* dx = grad_for(nd.in[0], grads, live);
                BasicTensor<T>* dw = grad_for(nd.in[1], grads, live);
                BasicTensor<T>* db = grad_for(nd.in[2], grads, live);
                ops::conv2d_bwd(nodes_[nd.in[0]].value, nodes_[nd.in[1]].value, g, nd.p0, dx, dw,
                                db);
                break;
            }
            case Op::deconv2d: {
                BasicTensor<T>* dx = grad_for(nd.in[0], grads, live);
                BasicTensor<T>* dw = grad_for(nd.in[1], grads, live);
                BasicTensor<T>* db = grad_for(nd.in[2], grads, live);
                ops::deconv2d_bwd(nodes_[nd.in[0]].value, nodes_[nd.in[1]].value, g, nd.p1, nd.p0,
                                  dx, dw, db);
                break;
            }
            case Op::relu:
                if (auto* dx = grad_for(nd.in[0], grads, live)) {
                    for (std::size_t j = 0; j < g.data.size(); ++j)
                        if (nd.value.data[j] > T(0)) dx->data[j] += g.data[j];
                }
                break;
            case Op::sigmoid:
                if (auto* dx = grad_for(nd.in[0], grads, live)) {
                    for (std::size_t j = 0; j < g.data.size(); ++j) {
                        const T s = nd.value.data[j];
                        dx->data[j] += g.data[j] * s * (T(1) - s);
                    }
                }
                break;
            case Op::maxpool2:
                if (auto* dx = grad_for(nd.in[0], grads, live)) ops::maxpool2_bwd(nd.argmax, g, dx);
                break;
            case Op::upsample2:
                if (auto* dx = grad_for(nd.in[0], grads, live)) ops::upsample2_bwd(g, dx);
                break;
            case Op::concat: {
                BasicTensor<T>* da = grad_for(nd.in[0], grads, live);
                BasicTensor<T>* db = grad_for(nd.in[1], grads, live);
                BasicTensor<T> tmp_a, tmp_b;
                if (!da || !db) {
                    // concat_bwd needs both sides; route the unused one to scratch
                    if (!da) {
                        tmp_a = BasicTensor<T>(nodes_[nd.in[0]].value.shape);
                        da = &tmp_a;
                    }
                    if (!db) {
                        tmp_b = BasicTensor<T>(nodes_[nd.in[1]].value.shape);
                        db = &tmp_b;
                    }
                }
                ops::concat_bwd(g, da, db);
                break;
            }
            case Op::add: {
                if (auto* da = grad_for(nd.in[0], grads, live))
                    for (std::size_t j = 0; j < g.data.size(); ++j) da->data[j] += g.data[j];
                if (auto* db = grad_for(nd.in[1], grads, live))
                    for (std::size_t j = 0; j < g.data.size(); ++j) db->data[j] += g.data[j];
                break;
            }
            case Op::mul: {
                const BasicTensor<T>& av = nodes_[nd.in[0]].value;
                const BasicTensor<T>& bv = nodes_[nd.in[1]].value;
                if (auto* da = grad_for(nd.in[0], grads, live))
                    for (std::size_t j = 0; j < g.data.size(); ++j)
                        da->data[j] += g.data[j] * bv.data[j];
                if (auto* db = grad_for(nd.in[1], grads, live))
                    for (std::size_t j = 0; j < g.data.size(); ++j)
                        db->data[j] += g.data[j] * av.data[j];
                break;
            }
            case Op::scale:
                if (auto* da = grad_for(nd.in[0], grads, live))
                    for (std::size_t j = 0; j < g.data.size(); ++j)
                        da->data[j] += static_cast<T>(static_cast<double>(g.data[j]) * nd.scalar);
                break;
            case Op::add_scalar:
                if (auto* da = grad_for(nd.in[0], grads, live))
                    for (std::size_t j = 0; j < g.data.size(); ++j) da->data[j] += g.data[j];
                break;
            case Op::divide: {
                const BasicTensor<T>& av = nodes_[nd.in[0]].value;
                const BasicTensor<T>& bv = nodes_[nd.in[1]].value;
                if (auto* da = grad_for(nd.in[0], grads, live))
                    for (std::size_t j = 0; j < g.data.size(); ++j)
                        da->data[j] += g.data[j] / bv.data[j];
                if (auto* db = grad_for(nd.in[1], grads, live))
                    for (std::size_t j = 0; j < g.data.size(); ++j)
                        db->data[j] -= g.data[j] * av.data[j] / (bv.data[j] * bv.data[j]);
                break;
            }
            case Op::sum_all:
                if (auto* dx = grad_for(nd.in[0], grads, live)) {
                    const T gv = g.data[0];
                    for (T& v : dx->data) v += gv;
                }
                break;
        }
    }
};

}  // namespace dsnet
