#pragma once

// Define-by-run reverse-mode differentiation over the layer set the U-Net
// needs. Ops append nodes to a Tape; backward() replays the recorded
// closures in reverse creation order. All heavy lifting is in kernels.hpp,
// so gradients are bit-identical for any worker count.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "idr/errors.hpp"
#include "idr/kernels.hpp"
#include "idr/tensor.hpp"

namespace idr {

template <typename T>
class Tape {
public:
    explicit Tape(bool record = true, bool check_finite = false)
        : record_(record), check_finite_(check_finite) {}

    int leaf(Tensor<T> value) {
        if (check_finite_) require_finite(value, "tape leaf");
        nodes_.push_back(Node{std::move(value), nullptr, {}});
        return static_cast<int>(nodes_.size()) - 1;
    }

    Tensor<T>& val(int id) { return nodes_[static_cast<std::size_t>(id)].t; }
    const Tensor<T>& val(int id) const { return nodes_[static_cast<std::size_t>(id)].t; }

    // Gradient buffer of a node; empty until backward() reaches it.
    std::vector<T>& grad(int id) { return nodes_[static_cast<std::size_t>(id)].t.g; }

    bool check_finite() const { return check_finite_; }

    int conv2d(int input, int kernel, int bias) {
        const Tensor<T>& x = val(input);
        const Tensor<T>& w = val(kernel);
        const Tensor<T>& b = val(bias);
        if (x.rank() != 4) throw ShapeError("conv2d: input must be 4-d, got " + shape_str(x.shape));
        if (w.rank() != 4 || w.dim(2) != w.dim(3) || w.dim(2) % 2 == 0)
            throw ShapeError("conv2d: kernel must be (out,in,k,k) with odd k, got " + shape_str(w.shape));
        if (w.dim(1) != x.dim(1))
            throw ShapeError("conv2d: kernel expects " + std::to_string(w.dim(1)) +
                             " input channels, input has " + std::to_string(x.dim(1)));
        if (b.rank() != 1 || b.dim(0) != w.dim(0))
            throw ShapeError("conv2d: bias shape " + shape_str(b.shape) + " does not match " +
                             std::to_string(w.dim(0)) + " output channels");

        const kernels::Conv2dDims d{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2)};
        Tensor<T> out(Shape{d.n, d.co, d.h, d.w});
        kernels::conv2d_forward(x.v.data(), w.v.data(), b.v.data(), out.v.data(), d);
        return push(std::move(out), "conv2d", [input, kernel, bias, d](Tape& tp, Node& self) {
            Tensor<T>& x = tp.val(input);
            Tensor<T>& w = tp.val(kernel);
            Tensor<T>& b = tp.val(bias);
            x.ensure_grad();
            w.ensure_grad();
            b.ensure_grad();
            kernels::conv2d_backward_input(self.t.g.data(), w.v.data(), x.g.data(), d);
            kernels::conv2d_backward_params(self.t.g.data(), x.v.data(), w.g.data(), b.g.data(), d);
        });
    }

    int leaky_relu(int input, T slope) {
        if (!(slope >= T(0) && slope < T(1)))
            throw ShapeError("leaky_relu: slope must lie in [0,1)");
        const Tensor<T>& x = val(input);
        Tensor<T> out(x.shape);
        kernels::leaky_relu_forward(x.v.data(), out.v.data(), x.numel(), slope);
        return push(std::move(out), "leaky_relu", [input, slope](Tape& tp, Node& self) {
            Tensor<T>& x = tp.val(input);
            x.ensure_grad();
            kernels::leaky_relu_backward(x.v.data(), self.t.g.data(), x.g.data(), x.numel(), slope);
        });
    }

    int maxpool2(int input) {
        const Tensor<T>& x = val(input);
        if (x.rank() != 4 || x.dim(2) % 2 || x.dim(3) % 2)
            throw ShapeError("maxpool2: spatial extents must be even, got " + shape_str(x.shape));
        const std::int64_t planes = static_cast<std::int64_t>(x.dim(0)) * x.dim(1);
        Tensor<T> out(Shape{x.dim(0), x.dim(1), x.dim(2) / 2, x.dim(3) / 2});
        std::vector<std::uint8_t> argmax(static_cast<std::size_t>(out.numel()));
        kernels::maxpool2_forward(x.v.data(), out.v.data(), argmax.data(), planes, x.dim(2), x.dim(3));
        const int h = x.dim(2), w = x.dim(3);
        int id = push(std::move(out), "maxpool2", [input, planes, h, w](Tape& tp, Node& self) {
            Tensor<T>& x = tp.val(input);
            x.ensure_grad();
            kernels::maxpool2_backward(self.t.g.data(), self.aux.data(), x.g.data(), planes, h, w);
        });
        nodes_.back().aux = std::move(argmax);
        return id;
    }

    int upsample2(int input) {
        const Tensor<T>& x = val(input);
        if (x.rank() != 4) throw ShapeError("upsample2: input must be 4-d");
        const std::int64_t planes = static_cast<std::int64_t>(x.dim(0)) * x.dim(1);
        Tensor<T> out(Shape{x.dim(0), x.dim(1), x.dim(2) * 2, x.dim(3) * 2});
        kernels::upsample2_forward(x.v.data(), out.v.data(), planes, x.dim(2), x.dim(3));
        const int h = x.dim(2), w = x.dim(3);
        return push(std::move(out), "upsample2", [input, planes, h, w](Tape& tp, Node& self) {
            Tensor<T>& x = tp.val(input);
            x.ensure_grad();
            kernels::upsample2_backward(self.t.g.data(), x.g.data(), planes, h, w);
        });
    }

    int concat_channels(int a, int b) {
        const Tensor<T>& ta = val(a);
        const Tensor<T>& tb = val(b);
        if (ta.rank() != 4 || tb.rank() != 4 || ta.dim(0) != tb.dim(0) || ta.dim(2) != tb.dim(2) ||
            ta.dim(3) != tb.dim(3))
            throw ShapeError("concat_channels: batch/spatial mismatch " + shape_str(ta.shape) + " vs " +
                             shape_str(tb.shape));
        const int ca = ta.dim(1), cb = tb.dim(1);
        const std::size_t hw = static_cast<std::size_t>(ta.dim(2)) * ta.dim(3);
        Tensor<T> out(Shape{ta.dim(0), ca + cb, ta.dim(2), ta.dim(3)});
        for (int n = 0; n < ta.dim(0); ++n) {
            std::copy_n(ta.v.data() + static_cast<std::size_t>(n) * ca * hw, static_cast<std::size_t>(ca) * hw,
                        out.v.data() + static_cast<std::size_t>(n) * (ca + cb) * hw);
            std::copy_n(tb.v.data() + static_cast<std::size_t>(n) * cb * hw, static_cast<std::size_t>(cb) * hw,
                        out.v.data() + (static_cast<std::size_t>(n) * (ca + cb) + ca) * hw);
        }
        return push(std::move(out), "concat", [a, b, ca, cb, hw](Tape& tp, Node& self) {
            Tensor<T>& ta = tp.val(a);
            Tensor<T>& tb = tp.val(b);
            ta.ensure_grad();
            tb.ensure_grad();
            for (int n = 0; n < ta.dim(0); ++n) {
                const T* src = self.t.g.data() + static_cast<std::size_t>(n) * (ca + cb) * hw;
                kernels::add_inplace(ta.g.data() + static_cast<std::size_t>(n) * ca * hw, src,
                                     static_cast<std::int64_t>(ca) * static_cast<std::int64_t>(hw));
                kernels::add_inplace(tb.g.data() + static_cast<std::size_t>(n) * cb * hw,
                                     src + static_cast<std::size_t>(ca) * hw,
                                     static_cast<std::int64_t>(cb) * static_cast<std::int64_t>(hw));
            }
        });
    }

    int l1_loss(int pred, int target) {
        const Tensor<T>& p = val(pred);
        const Tensor<T>& t = val(target);
        require_same_shape(p, t, "l1_loss");
        Tensor<T> out(Shape{1});
        out.v[0] = kernels::l1_loss_value(p.v.data(), t.v.data(), p.numel());
        return push(std::move(out), "l1_loss", [pred, target](Tape& tp, Node& self) {
            Tensor<T>& p = tp.val(pred);
            Tensor<T>& t = tp.val(target);
            p.ensure_grad();
            t.ensure_grad();
            kernels::l1_loss_backward(p.v.data(), t.v.data(), self.t.g[0], p.g.data(), t.g.data(),
                                      p.numel());
        });
    }

    // Seeds d(root)/d(root) = 1 and propagates to every node that feeds it.
    void backward(int root) {
        Tensor<T>& r = val(root);
        if (r.numel() != 1) throw ShapeError("backward: root must be scalar");
        r.ensure_grad();
        r.g[0] = T(1);
        for (int i = root; i >= 0; --i) {
            Node& node = nodes_[static_cast<std::size_t>(i)];
            if (node.back && !node.t.g.empty()) node.back(*this, node);
        }
    }

private:
    struct Node {
        Tensor<T> t;
        std::function<void(Tape&, Node&)> back;
        std::vector<std::uint8_t> aux;
    };

    int push(Tensor<T> value, const char* op, std::function<void(Tape&, Node&)> back) {
        if (check_finite_) require_finite(value, op);
        nodes_.push_back(Node{std::move(value), record_ ? std::move(back) : nullptr, {}});
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
    bool record_;
    bool check_finite_;
};

}  // namespace idr
