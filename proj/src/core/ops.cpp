#include "ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rw::ag {

namespace {

using MatRM = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using CMapM = Eigen::Map<const MatRM>;
using MapV = Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, 1>>;
using CMapV = Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, 1>>;

CMapM as_mat(const Tensor& t) { return CMapM(t.data(), t.rows(), t.cols()); }
MapM as_mat(Tensor& t) { return MapM(t.data(), t.rows(), t.cols()); }
CMapV as_vec(const Tensor& t) { return CMapV(t.data(), static_cast<Eigen::Index>(t.size())); }
MapV as_vec(Tensor& t) { return MapV(t.data(), static_cast<Eigen::Index>(t.size())); }

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

void require(bool cond, const char* what)
{
    if (!cond) throw std::invalid_argument(what);
}

void require_same_size(const Var& a, const Var& b, const char* op)
{
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(op) + ": size mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}

Real sigmoid_scalar(Real v)
{
    if (v >= 0) {
        const Real e = std::exp(-v);
        return 1.0 / (1.0 + e);
    }
    const Real e = std::exp(v);
    return e / (1.0 + e);
}

}  // namespace

Var constant(Tensor t) { return Var(std::move(t), false); }

Var matmul(const Var& a, const Var& b)
{
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows())
        throw std::invalid_argument("matmul: inner dimension mismatch " + shape_str(av.shape()) + " x " +
                                    shape_str(bv.shape()));
    Tensor out({av.rows(), bv.cols()});
    as_mat(out).noalias() = as_mat(av) * as_mat(bv);
    return make_result(std::move(out), {a, b}, [](Node& n) {
        Node& pa = parent(n, 0);
        Node& pb = parent(n, 1);
        if (pa.requires_grad) as_mat(pa.grad_buffer()).noalias() += as_mat(n.grad) * as_mat(pb.value).transpose();
        if (pb.requires_grad) as_mat(pb.grad_buffer()).noalias() += as_mat(pa.value).transpose() * as_mat(n.grad);
    });
}

Var linear(const Var& x, const Var& w, const Var& b)
{
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    if (xv.cols() != wv.rows())
        throw std::invalid_argument("linear: input width " + std::to_string(xv.cols()) + " does not match weight " +
                                    shape_str(wv.shape()));
    std::vector<int> shape = xv.shape();
    shape.back() = wv.cols();
    Tensor out(shape);
    auto om = MapM(out.data(), xv.rows(), wv.cols());
    om.noalias() = as_mat(xv) * as_mat(wv);
    const bool has_bias = b.defined();
    if (has_bias) {
        if (b.size() != static_cast<std::size_t>(wv.cols())) throw std::invalid_argument("linear: bias size mismatch");
        om.rowwise() += as_vec(b.value()).transpose();
    }
    auto fn = [has_bias](Node& n) {
        Node& px = parent(n, 0);
        Node& pw = parent(n, 1);
        const Tensor& xval = px.value;
        auto g = CMapM(n.grad.data(), xval.rows(), pw.value.cols());
        if (px.requires_grad) as_mat(px.grad_buffer()).noalias() += g * as_mat(pw.value).transpose();
        if (pw.requires_grad) as_mat(pw.grad_buffer()).noalias() += as_mat(xval).transpose() * g;
        if (has_bias) {
            Node& pb = parent(n, 2);
            if (pb.requires_grad) as_vec(pb.grad_buffer()) += g.colwise().sum().transpose();
        }
    };
    if (has_bias) return make_result(std::move(out), {x, w, b}, fn);
    return make_result(std::move(out), {x, w}, fn);
}

Var transpose(const Var& a)
{
    const Tensor& av = a.value();
    Tensor out({av.cols(), av.rows()});
    as_mat(out) = as_mat(av).transpose();
    return make_result(std::move(out), {a}, [](Node& n) {
        Node& pa = parent(n, 0);
        if (pa.requires_grad) as_mat(pa.grad_buffer()) += as_mat(n.grad).transpose();
    });
}

Var add(const Var& a, const Var& b)
{
    require_same_size(a, b, "add");
    Tensor out = a.value();
    as_vec(out) += as_vec(b.value());
    return make_result(std::move(out), {a, b}, [](Node& n) {
        for (std::size_t i = 0; i < 2; ++i) {
            Node& p = parent(n, i);
            if (p.requires_grad) as_vec(p.grad_buffer()) += as_vec(n.grad);
        }
    });
}

Var sub(const Var& a, const Var& b)
{
    require_same_size(a, b, "sub");
    Tensor out = a.value();
    as_vec(out) -= as_vec(b.value());
    return make_result(std::move(out), {a, b}, [](Node& n) {
        Node& pa = parent(n, 0);
        Node& pb = parent(n, 1);
        if (pa.requires_grad) as_vec(pa.grad_buffer()) += as_vec(n.grad);
        if (pb.requires_grad) as_vec(pb.grad_buffer()) -= as_vec(n.grad);
    });
}

Var mul(const Var& a, const Var& b)
{
    require_same_size(a, b, "mul");
    Tensor out = a.value();
    as_vec(out).array() *= as_vec(b.value()).array();
    return make_result(std::move(out), {a, b}, [](Node& n) {
        Node& pa = parent(n, 0);
        Node& pb = parent(n, 1);
        if (pa.requires_grad) as_vec(pa.grad_buffer()).array() += as_vec(n.grad).array() * as_vec(pb.value).array();
        if (pb.requires_grad) as_vec(pb.grad_buffer()).array() += as_vec(n.grad).array() * as_vec(pa.value).array();
    });
}

Var scale(const Var& a, Real s)
{
    Tensor out = a.value();
    as_vec(out) *= s;
    return make_result(std::move(out), {a}, [s](Node& n) {
        Node& pa = parent(n, 0);
        if (pa.requires_grad) as_vec(pa.grad_buffer()) += s * as_vec(n.grad);
    });
}

Var add_row(const Var& x, const Var& row)
{
    const Tensor& xv = x.value();
    if (row.size() != static_cast<std::size_t>(xv.cols())) throw std::invalid_argument("add_row: width mismatch");
    Tensor out = xv;
    as_mat(out).rowwise() += as_vec(row.value()).transpose();
    return make_result(std::move(out), {x, row}, [](Node& n) {
        Node& px = parent(n, 0);
        Node& pr = parent(n, 1);
        if (px.requires_grad) as_vec(px.grad_buffer()) += as_vec(n.grad);
        if (pr.requires_grad) as_vec(pr.grad_buffer()) += as_mat(n.grad).colwise().sum().transpose();
    });
}

Var mul_row(const Var& x, const Var& row)
{
    const Tensor& xv = x.value();
    if (row.size() != static_cast<std::size_t>(xv.cols())) throw std::invalid_argument("mul_row: width mismatch");
    Tensor out = xv;
    as_mat(out).array().rowwise() *= as_vec(row.value()).transpose().array();
    return make_result(std::move(out), {x, row}, [](Node& n) {
        Node& px = parent(n, 0);
        Node& pr = parent(n, 1);
        auto g = as_mat(n.grad).array();
        if (px.requires_grad) as_mat(px.grad_buffer()).array() += g.rowwise() * as_vec(pr.value).transpose().array();
        if (pr.requires_grad)
            as_vec(pr.grad_buffer()) += (g * as_mat(px.value).array()).matrix().colwise().sum().transpose();
    });
}

Var mul_col(const Var& x, const Var& s)
{
    const Tensor& xv = x.value();
    if (s.size() != static_cast<std::size_t>(xv.rows())) throw std::invalid_argument("mul_col: height mismatch");
    Tensor out = xv;
    as_mat(out).array().colwise() *= as_vec(s.value()).array();
    return make_result(std::move(out), {x, s}, [](Node& n) {
        Node& px = parent(n, 0);
        Node& ps = parent(n, 1);
        auto g = as_mat(n.grad).array();
        if (px.requires_grad) as_mat(px.grad_buffer()).array() += g.colwise() * as_vec(ps.value).array();
        if (ps.requires_grad) as_vec(ps.grad_buffer()) += (g * as_mat(px.value).array()).matrix().rowwise().sum();
    });
}

Var silu(const Var& x)
{
    Tensor out = x.value();
    for (auto& v : out.values()) v = v * sigmoid_scalar(v);
    return make_result(std::move(out), {x}, [](Node& n) {
        Node& px = parent(n, 0);
        if (!px.requires_grad) return;
        Tensor& g = px.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Real v = px.value[i];
            const Real s = sigmoid_scalar(v);
            g[i] += n.grad[i] * (s * (1.0 + v * (1.0 - s)));
        }
    });
}

Var tanh(const Var& x)
{
    Tensor out = x.value();
    for (auto& v : out.values()) v = std::tanh(v);
    return make_result(std::move(out), {x}, [](Node& n) {
        Node& px = parent(n, 0);
        if (!px.requires_grad) return;
        Tensor& g = px.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * (1.0 - n.value[i] * n.value[i]);
    });
}

Var sigmoid(const Var& x)
{
    Tensor out = x.value();
    for (auto& v : out.values()) v = sigmoid_scalar(v);
    return make_result(std::move(out), {x}, [](Node& n) {
        Node& px = parent(n, 0);
        if (!px.requires_grad) return;
        Tensor& g = px.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * n.value[i] * (1.0 - n.value[i]);
    });
}

Var layer_norm(const Var& x, Real eps)
{
    require(eps > 0, "layer_norm: eps must be positive");
    const Tensor& xv = x.value();
    const int rows = xv.rows();
    const int d = xv.cols();
    Tensor out(xv.shape());
    Tensor inv_std({rows});
    for (int r = 0; r < rows; ++r) {
        const Real* src = xv.data() + static_cast<std::size_t>(r) * d;
        Real* dst = out.data() + static_cast<std::size_t>(r) * d;
        Real mu = 0;
        for (int k = 0; k < d; ++k) mu += src[k];
        mu /= d;
        Real var = 0;
        for (int k = 0; k < d; ++k) var += (src[k] - mu) * (src[k] - mu);
        var /= d;
        const Real is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        for (int k = 0; k < d; ++k) dst[k] = (src[k] - mu) * is;
    }
    return make_result(std::move(out), {x}, [inv_std = std::move(inv_std), rows, d](Node& n) {
        Node& px = parent(n, 0);
        if (!px.requires_grad) return;
        Tensor& g = px.grad_buffer();
        for (int r = 0; r < rows; ++r) {
            const std::size_t off = static_cast<std::size_t>(r) * d;
            const Real* dy = n.grad.data() + off;
            const Real* y = n.value.data() + off;
            Real mdy = 0, mdyy = 0;
            for (int k = 0; k < d; ++k) {
                mdy += dy[k];
                mdyy += dy[k] * y[k];
            }
            mdy /= d;
            mdyy /= d;
            for (int k = 0; k < d; ++k) g[off + k] += inv_std[r] * (dy[k] - mdy - y[k] * mdyy);
        }
    });
}

Var softmax_rows(const Var& x)
{
    const Tensor& xv = x.value();
    const int rows = xv.rows();
    const int d = xv.cols();
    Tensor out(xv.shape());
    for (int r = 0; r < rows; ++r) {
        const Real* src = xv.data() + static_cast<std::size_t>(r) * d;
        Real* dst = out.data() + static_cast<std::size_t>(r) * d;
        const Real mx = *std::max_element(src, src + d);
        Real s = 0;
        for (int k = 0; k < d; ++k) s += (dst[k] = std::exp(src[k] - mx));
        for (int k = 0; k < d; ++k) dst[k] /= s;
    }
    return make_result(std::move(out), {x}, [rows, d](Node& n) {
        Node& px = parent(n, 0);
        if (!px.requires_grad) return;
        Tensor& g = px.grad_buffer();
        for (int r = 0; r < rows; ++r) {
            const std::size_t off = static_cast<std::size_t>(r) * d;
            Real dot = 0;
            for (int k = 0; k < d; ++k) dot += n.grad[off + k] * n.value[off + k];
            for (int k = 0; k < d; ++k) g[off + k] += n.value[off + k] * (n.grad[off + k] - dot);
        }
    });
}

Var log_softmax_rows(const Var& x)
{
    const Tensor& xv = x.value();
    const int rows = xv.rows();
    const int d = xv.cols();
    Tensor out(xv.shape());
    for (int r = 0; r < rows; ++r) {
        const Real* src = xv.data() + static_cast<std::size_t>(r) * d;
        Real* dst = out.data() + static_cast<std::size_t>(r) * d;
        const Real mx = *std::max_element(src, src + d);
        Real s = 0;
        for (int k = 0; k < d; ++k) s += std::exp(src[k] - mx);
        const Real lse = mx + std::log(s);
        for (int k = 0; k < d; ++k) dst[k] = src[k] - lse;
    }
    return make_result(std::move(out), {x}, [rows, d](Node& n) {
        Node& px = parent(n, 0);
        if (!px.requires_grad) return;
        Tensor& g = px.grad_buffer();
        for (int r = 0; r < rows; ++r) {
            const std::size_t off = static_cast<std::size_t>(r) * d;
            Real gs = 0;
            for (int k = 0; k < d; ++k) gs += n.grad[off + k];
            for (int k = 0; k < d; ++k) g[off + k] += n.grad[off + k] - std::exp(n.value[off + k]) * gs;
        }
    });
}

Var reshape(const Var& x, std::vector<int> shape)
{
    Tensor out = x.value();
    out.reshape(std::move(shape));
    return make_result(std::move(out), {x}, [](Node& n) {
        Node& px = parent(n, 0);
        if (px.requires_grad) as_vec(px.grad_buffer()) += as_vec(n.grad);
    });
}

Var concat_cols(const std::vector<Var>& parts)
{
    require(!parts.empty(), "concat_cols: no inputs");
    const int rows = parts.front().value().rows();
    std::vector<int> widths;
    int total = 0;
    for (const Var& p : parts) {
        if (p.value().rows() != rows) throw std::invalid_argument("concat_cols: row count mismatch");
        widths.push_back(p.value().cols());
        total += widths.back();
    }
    Tensor out({rows, total});
    int off = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        as_mat(out).middleCols(off, widths[i]) = as_mat(parts[i].value());
        off += widths[i];
    }
    return make_result_list(std::move(out), parts, [widths](Node& n) {
        int o = 0;
        for (std::size_t i = 0; i < widths.size(); ++i) {
            Node& p = parent(n, i);
            if (p.requires_grad) as_mat(p.grad_buffer()) += as_mat(n.grad).middleCols(o, widths[i]);
            o += widths[i];
        }
    });
}

Var concat_rows(const std::vector<Var>& parts)
{
    require(!parts.empty(), "concat_rows: no inputs");
    const int cols = parts.front().value().cols();
    std::vector<int> heights;
    int total = 0;
    for (const Var& p : parts) {
        if (p.value().cols() != cols) throw std::invalid_argument("concat_rows: column count mismatch");
        heights.push_back(p.value().rows());
        total += heights.back();
    }
    Tensor out({total, cols});
    std::size_t off = 0;
    for (const Var& p : parts) {
        std::copy(p.value().data(), p.value().data() + p.size(), out.data() + off);
        off += p.size();
    }
    return make_result_list(std::move(out), parts, [](Node& n) {
        std::size_t o = 0;
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
            Node& p = parent(n, i);
            const std::size_t len = p.value.size();
            if (p.requires_grad) {
                Tensor& g = p.grad_buffer();
                for (std::size_t k = 0; k < len; ++k) g[k] += n.grad[o + k];
            }
            o += len;
        }
    });
}

Var slice_cols(const Var& x, int start, int len)
{
    const Tensor& xv = x.value();
    if (start < 0 || len < 0 || start + len > xv.cols()) throw std::invalid_argument("slice_cols: out of range");
    Tensor out({xv.rows(), len});
    as_mat(out) = as_mat(xv).middleCols(start, len);
    return make_result(std::move(out), {x}, [start, len](Node& n) {
        Node& px = parent(n, 0);
        if (px.requires_grad) as_mat(px.grad_buffer()).middleCols(start, len) += as_mat(n.grad);
    });
}

Var slice_rows(const Var& x, int start, int len)
{
    const Tensor& xv = x.value();
    if (start < 0 || len < 0 || start + len > xv.rows()) throw std::invalid_argument("slice_rows: out of range");
    const int c = xv.cols();
    Tensor out({len, c});
    std::copy(xv.data() + static_cast<std::size_t>(start) * c, xv.data() + static_cast<std::size_t>(start + len) * c,
              out.data());
    return make_result(std::move(out), {x}, [start, c](Node& n) {
        Node& px = parent(n, 0);
        if (!px.requires_grad) return;
        Tensor& g = px.grad_buffer();
        const std::size_t off = static_cast<std::size_t>(start) * c;
        for (std::size_t k = 0; k < n.grad.size(); ++k) g[off + k] += n.grad[k];
    });
}

Var sum(const Var& x)
{
    return make_result(Tensor::scalar(as_vec(x.value()).sum()), {x}, [](Node& n) {
        Node& px = parent(n, 0);
        if (px.requires_grad) as_vec(px.grad_buffer()).array() += n.grad[0];
    });
}

Var mean(const Var& x)
{
    const Real count = static_cast<Real>(x.size());
    require(count > 0, "mean: empty tensor");
    return make_result(Tensor::scalar(as_vec(x.value()).sum() / count), {x}, [count](Node& n) {
        Node& px = parent(n, 0);
        if (px.requires_grad) as_vec(px.grad_buffer()).array() += n.grad[0] / count;
    });
}

Var mean_rows(const Var& x)
{
    const Tensor& xv = x.value();
    const int rows = xv.rows();
    require(rows > 0, "mean_rows: empty tensor");
    Tensor out({xv.cols()});
    as_vec(out) = as_mat(xv).colwise().mean().transpose();
    return make_result(std::move(out), {x}, [rows](Node& n) {
        Node& px = parent(n, 0);
        if (px.requires_grad)
            as_mat(px.grad_buffer()).rowwise() += (as_vec(n.grad) / static_cast<Real>(rows)).transpose();
    });
}

Var conv2d(const Var& x, const Var& w, const Var& b, const ConvGeometry& geo)
{
    const Tensor& xv = x.value();
    const int cin = xv.cols();
    const int k = geo.kernel;
    if (xv.rows() != geo.height * geo.width) throw std::invalid_argument("conv2d: input does not match geometry");
    if (w.value().rows() != k * k * cin) throw std::invalid_argument("conv2d: weight does not match kernel*cin");
    const int oh = geo.out_height();
    const int ow = geo.out_width();
    const int cout = w.value().cols();
    const int patch = k * k * cin;

    // im2col; -1 marks a padded tap.
    Tensor cols({oh * ow, patch});
    std::vector<int> src_index(static_cast<std::size_t>(oh * ow * k * k), -1);
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
            const int row = oy * ow + ox;
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    const int iy = oy * geo.stride - geo.pad + ky;
                    const int ix = ox * geo.stride - geo.pad + kx;
                    const int tap = ky * k + kx;
                    if (iy < 0 || iy >= geo.height || ix < 0 || ix >= geo.width) continue;
                    const int src = iy * geo.width + ix;
                    src_index[static_cast<std::size_t>(row * k * k + tap)] = src;
                    std::copy(xv.data() + static_cast<std::size_t>(src) * cin,
                              xv.data() + static_cast<std::size_t>(src + 1) * cin,
                              cols.data() + static_cast<std::size_t>(row) * patch + tap * cin);
                }
        }
    Tensor out({oh * ow, cout});
    as_mat(out).noalias() = as_mat(cols) * as_mat(w.value());
    const bool has_bias = b.defined();
    if (has_bias) as_mat(out).rowwise() += as_vec(b.value()).transpose();

    auto fn = [cols = std::move(cols), src_index = std::move(src_index), has_bias, cin, k, patch](Node& n) {
        Node& px = parent(n, 0);
        Node& pw = parent(n, 1);
        if (pw.requires_grad) as_mat(pw.grad_buffer()).noalias() += as_mat(cols).transpose() * as_mat(n.grad);
        if (has_bias) {
            Node& pb = parent(n, 2);
            if (pb.requires_grad) as_vec(pb.grad_buffer()) += as_mat(n.grad).colwise().sum().transpose();
        }
        if (px.requires_grad) {
            MatRM dcols = as_mat(n.grad) * as_mat(pw.value).transpose();
            Tensor& g = px.grad_buffer();
            const int rows = static_cast<int>(dcols.rows());
            for (int row = 0; row < rows; ++row)
                for (int tap = 0; tap < k * k; ++tap) {
                    const int src = src_index[static_cast<std::size_t>(row * k * k + tap)];
                    if (src < 0) continue;
                    const Real* d = dcols.data() + static_cast<std::size_t>(row) * patch + tap * cin;
                    Real* dst = g.data() + static_cast<std::size_t>(src) * cin;
                    for (int c = 0; c < cin; ++c) dst[c] += d[c];
                }
        }
    };
    if (has_bias) return make_result(std::move(out), {x, w, b}, std::move(fn));
    return make_result(std::move(out), {x, w}, std::move(fn));
}

namespace {

struct Corners {
    int index[4];
    Real weight[4];
    // d weight / d row, d weight / d col
    Real drow[4];
    Real dcol[4];
};

Corners bilinear_corners(Real r, Real c, int height, int width)
{
    Corners out{};
    const Real r0f = std::floor(r);
    const Real c0f = std::floor(c);
    const Real fr = r - r0f;
    const Real fc = c - c0f;
    const int r0 = static_cast<int>(r0f);
    const int c0 = static_cast<int>(c0f);
    const int rr[4] = {r0, r0, r0 + 1, r0 + 1};
    const int cc[4] = {c0, c0 + 1, c0, c0 + 1};
    const Real w[4] = {(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc), fr * fc};
    const Real dr[4] = {-(1 - fc), -fc, (1 - fc), fc};
    const Real dc[4] = {-(1 - fr), (1 - fr), -fr, fr};
    for (int i = 0; i < 4; ++i) {
        const bool inside = rr[i] >= 0 && rr[i] < height && cc[i] >= 0 && cc[i] < width;
        out.index[i] = inside ? rr[i] * width + cc[i] : -1;
        out.weight[i] = w[i];
        out.drow[i] = dr[i];
        out.dcol[i] = dc[i];
    }
    return out;
}

}  // namespace

Var bilinear_sample(const Var& map, int height, int width, const Tensor& pos)
{
    const Tensor& mv = map.value();
    if (mv.rows() != height * width) throw std::invalid_argument("bilinear_sample: map does not match geometry");
    if (pos.cols() != 2) throw std::invalid_argument("bilinear_sample: positions must be [n,2]");
    const int n = pos.rows();
    const int c = mv.cols();
    std::vector<Corners> corners(static_cast<std::size_t>(n));
    Tensor out({n, c});
    for (int q = 0; q < n; ++q) {
        const Corners cr = bilinear_corners(pos[2 * q], pos[2 * q + 1], height, width);
        corners[static_cast<std::size_t>(q)] = cr;
        Real* dst = out.data() + static_cast<std::size_t>(q) * c;
        for (int i = 0; i < 4; ++i) {
            if (cr.index[i] < 0 || cr.weight[i] == 0.0) continue;
            const Real* src = mv.data() + static_cast<std::size_t>(cr.index[i]) * c;
            for (int k = 0; k < c; ++k) dst[k] += cr.weight[i] * src[k];
        }
    }
    return make_result(std::move(out), {map}, [corners = std::move(corners), c](Node& nd) {
        Node& pm = parent(nd, 0);
        if (!pm.requires_grad) return;
        Tensor& g = pm.grad_buffer();
        for (std::size_t q = 0; q < corners.size(); ++q) {
            const Corners& cr = corners[q];
            const Real* dy = nd.grad.data() + q * static_cast<std::size_t>(c);
            for (int i = 0; i < 4; ++i) {
                if (cr.index[i] < 0 || cr.weight[i] == 0.0) continue;
                Real* dst = g.data() + static_cast<std::size_t>(cr.index[i]) * c;
                for (int k = 0; k < c; ++k) dst[k] += cr.weight[i] * dy[k];
            }
        }
    });
}

Var deform_sample(const Var& value, int height, int width, int heads, const Var& loc, const Var& weights)
{
    const Tensor& vv = value.value();
    const Tensor& lv = loc.value();
    const Tensor& wv = weights.value();
    if (vv.rows() != height * width) throw std::invalid_argument("deform_sample: value does not match geometry");
    if (heads <= 0 || vv.cols() % heads != 0) throw std::invalid_argument("deform_sample: bad head count");
    const int n = wv.rows();
    const int hp = wv.cols();
    if (hp % heads != 0) throw std::invalid_argument("deform_sample: weights not divisible by heads");
    const int points = hp / heads;
    if (lv.rows() != n || lv.cols() != 2 * hp) throw std::invalid_argument("deform_sample: loc shape mismatch");
    const int hd = vv.cols() / heads;
    const int vc = vv.cols();

    Tensor out({n, vc});
    for (int q = 0; q < n; ++q)
        for (int h = 0; h < heads; ++h) {
            Real* dst = out.data() + static_cast<std::size_t>(q) * vc + h * hd;
            for (int p = 0; p < points; ++p) {
                const std::size_t wi = static_cast<std::size_t>(q) * hp + h * points + p;
                const Real aw = wv[wi];
                const Corners cr = bilinear_corners(lv[2 * wi], lv[2 * wi + 1], height, width);
                for (int i = 0; i < 4; ++i) {
                    if (cr.index[i] < 0) continue;
                    const Real cw = aw * cr.weight[i];
                    if (cw == 0.0) continue;
                    const Real* src = vv.data() + static_cast<std::size_t>(cr.index[i]) * vc + h * hd;
                    for (int k = 0; k < hd; ++k) dst[k] += cw * src[k];
                }
            }
        }

    return make_result(std::move(out), {value, loc, weights}, [height, width, heads, points, hd, vc, n, hp](Node& nd) {
        Node& pv = parent(nd, 0);
        Node& pl = parent(nd, 1);
        Node& pw = parent(nd, 2);
        const Tensor& vv = pv.value;
        const Tensor& lv = pl.value;
        const Tensor& wv = pw.value;
        Tensor* gv = pv.requires_grad ? &pv.grad_buffer() : nullptr;
        Tensor* gl = pl.requires_grad ? &pl.grad_buffer() : nullptr;
        Tensor* gw = pw.requires_grad ? &pw.grad_buffer() : nullptr;
        for (int q = 0; q < n; ++q)
            for (int h = 0; h < heads; ++h) {
                const Real* dy = nd.grad.data() + static_cast<std::size_t>(q) * vc + h * hd;
                for (int p = 0; p < points; ++p) {
                    const std::size_t wi = static_cast<std::size_t>(q) * hp + h * points + p;
                    const Real aw = wv[wi];
                    const Corners cr = bilinear_corners(lv[2 * wi], lv[2 * wi + 1], height, width);
                    Real dsw = 0, dr = 0, dc = 0;
                    for (int i = 0; i < 4; ++i) {
                        if (cr.index[i] < 0) continue;
                        const std::size_t base = static_cast<std::size_t>(cr.index[i]) * vc + h * hd;
                        Real dot = 0;
                        for (int k = 0; k < hd; ++k) dot += dy[k] * vv[base + k];
                        dsw += cr.weight[i] * dot;
                        dr += cr.drow[i] * dot;
                        dc += cr.dcol[i] * dot;
                        if (gv) {
                            const Real cw = aw * cr.weight[i];
                            if (cw != 0.0)
                                for (int k = 0; k < hd; ++k) (*gv)[base + k] += cw * dy[k];
                        }
                    }
                    if (gw) (*gw)[wi] += dsw;
                    if (gl) {
                        (*gl)[2 * wi] += aw * dr;
                        (*gl)[2 * wi + 1] += aw * dc;
                    }
                }
            }
    });
}

Var cross_entropy(const Var& logits, std::span<const int> targets)
{
    const Tensor& xv = logits.value();
    const int rows = xv.rows();
    const int classes = xv.cols();
    if (static_cast<std::size_t>(rows) != targets.size())
        throw std::invalid_argument("cross_entropy: target count does not match logits");
    require(rows > 0, "cross_entropy: empty input");
    std::vector<int> tgt(targets.begin(), targets.end());
    Tensor probs(xv.shape());
    Real total = 0;
    for (int r = 0; r < rows; ++r) {
        const int t = tgt[static_cast<std::size_t>(r)];
        if (t < 0 || t >= classes) throw std::invalid_argument("cross_entropy: invalid target label");
        const Real* src = xv.data() + static_cast<std::size_t>(r) * classes;
        Real* p = probs.data() + static_cast<std::size_t>(r) * classes;
        const Real mx = *std::max_element(src, src + classes);
        Real s = 0;
        for (int k = 0; k < classes; ++k) s += (p[k] = std::exp(src[k] - mx));
        for (int k = 0; k < classes; ++k) p[k] /= s;
        total += mx + std::log(s) - src[t];
    }
    return make_result(Tensor::scalar(total / rows), {logits},
                       [probs = std::move(probs), tgt = std::move(tgt), rows, classes](Node& n) {
                           Node& px = parent(n, 0);
                           if (!px.requires_grad) return;
                           Tensor& g = px.grad_buffer();
                           const Real s = n.grad[0] / rows;
                           for (int r = 0; r < rows; ++r) {
                               const std::size_t off = static_cast<std::size_t>(r) * classes;
                               for (int k = 0; k < classes; ++k) g[off + k] += s * probs[off + k];
                               g[off + static_cast<std::size_t>(tgt[static_cast<std::size_t>(r)])] -= s;
                           }
                       });
}

Var bce_with_logits(const Var& x, std::span<const Real> targets)
{
    const Tensor& xv = x.value();
    if (xv.size() != targets.size()) throw std::invalid_argument("bce_with_logits: size mismatch");
    require(xv.size() > 0, "bce_with_logits: empty input");
    std::vector<Real> y(targets.begin(), targets.end());
    Real total = 0;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const Real v = xv[i];
        total += std::max(v, 0.0) - v * y[i] + std::log1p(std::exp(-std::abs(v)));
    }
    const Real count = static_cast<Real>(xv.size());
    return make_result(Tensor::scalar(total / count), {x}, [y = std::move(y), count](Node& n) {
        Node& px = parent(n, 0);
        if (!px.requires_grad) return;
        Tensor& g = px.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += n.grad[0] * (sigmoid_scalar(px.value[i]) - y[i]) / count;
    });
}

Var occupied_logit(const Var& logits)
{
    const Tensor& xv = logits.value();
    const int rows = xv.rows();
    const int classes = xv.cols();
    require(classes >= 2, "occupied_logit: need at least two classes");
    Tensor out({rows});
    Tensor soft(xv.shape());
    for (int r = 0; r < rows; ++r) {
        const Real* src = xv.data() + static_cast<std::size_t>(r) * classes;
        Real* sp = soft.data() + static_cast<std::size_t>(r) * classes;
        const Real mx = *std::max_element(src + 1, src + classes);
        Real s = 0;
        for (int k = 1; k < classes; ++k) s += (sp[k] = std::exp(src[k] - mx));
        for (int k = 1; k < classes; ++k) sp[k] /= s;
        out[static_cast<std::size_t>(r)] = mx + std::log(s) - src[0];
    }
    return make_result(std::move(out), {logits}, [soft = std::move(soft), rows, classes](Node& n) {
        Node& px = parent(n, 0);
        if (!px.requires_grad) return;
        Tensor& g = px.grad_buffer();
        for (int r = 0; r < rows; ++r) {
            const std::size_t off = static_cast<std::size_t>(r) * classes;
            const Real gr = n.grad[static_cast<std::size_t>(r)];
            g[off] -= gr;
            for (int k = 1; k < classes; ++k) g[off + k] += gr * soft[off + k];
        }
    });
}

Var lovasz_softmax(const Var& probs, std::span<const int> targets)
{
    const Tensor& pv = probs.value();
    const int rows = pv.rows();
    const int classes = pv.cols();
    if (static_cast<std::size_t>(rows) != targets.size())
        throw std::invalid_argument("lovasz_softmax: target count does not match probabilities");
    require(rows > 0, "lovasz_softmax: empty input");

    std::vector<char> present(static_cast<std::size_t>(classes), 0);
    for (int t : targets) {
        if (t < 0 || t >= classes) throw std::invalid_argument("lovasz_softmax: invalid target label");
        present[static_cast<std::size_t>(t)] = 1;
    }

    // Per present class: the sort order and the Lovasz gradient vector.
    struct ClassTerm {
        int cls;
        std::vector<int> order;
        std::vector<Real> jgrad;
    };
    std::vector<ClassTerm> terms;
    Real total = 0;
    std::vector<Real> err(static_cast<std::size_t>(rows));
    for (int c = 0; c < classes; ++c) {
        if (!present[static_cast<std::size_t>(c)]) continue;
        Real gts = 0;
        for (int r = 0; r < rows; ++r) {
            const bool fg = targets[static_cast<std::size_t>(r)] == c;
            gts += fg ? 1.0 : 0.0;
            const Real p = pv[static_cast<std::size_t>(r) * classes + c];
            err[static_cast<std::size_t>(r)] = fg ? 1.0 - p : p;
        }
        ClassTerm term{c, std::vector<int>(static_cast<std::size_t>(rows)), std::vector<Real>(static_cast<std::size_t>(rows))};
        std::iota(term.order.begin(), term.order.end(), 0);
        std::stable_sort(term.order.begin(), term.order.end(),
                         [&](int a, int b) { return err[static_cast<std::size_t>(a)] > err[static_cast<std::size_t>(b)]; });
        Real cum_fg = 0, cum_bg = 0, prev_j = 0;
        Real loss_c = 0;
        // Summed by parts, sum_k (e_k - e_{k+1}) * J_k, so hard errors give the
        // Jaccard loss without rounding from the telescoping differences.
        for (int k = 0; k < rows; ++k) {
            const int idx = term.order[static_cast<std::size_t>(k)];
            const bool fg = targets[static_cast<std::size_t>(idx)] == c;
            (fg ? cum_fg : cum_bg) += 1.0;
            const Real jac = 1.0 - (gts - cum_fg) / (gts + cum_bg);
            term.jgrad[static_cast<std::size_t>(k)] = jac - prev_j;
            prev_j = jac;
            const Real e = err[static_cast<std::size_t>(idx)];
            const Real e_next = k + 1 < rows ? err[static_cast<std::size_t>(term.order[static_cast<std::size_t>(k + 1)])] : 0.0;
            loss_c += (e - e_next) * jac;
        }
        total += loss_c;
        terms.push_back(std::move(term));
    }
    const Real count = static_cast<Real>(terms.size());
    std::vector<int> tgt(targets.begin(), targets.end());
    return make_result(Tensor::scalar(total / count), {probs},
                       [terms = std::move(terms), tgt = std::move(tgt), count, classes](Node& n) {
                           Node& pp = parent(n, 0);
                           if (!pp.requires_grad) return;
                           Tensor& g = pp.grad_buffer();
                           const Real s = n.grad[0] / count;
                           for (const auto& term : terms)
                               for (std::size_t k = 0; k < term.order.size(); ++k) {
                                   const int idx = term.order[k];
                                   const bool fg = tgt[static_cast<std::size_t>(idx)] == term.cls;
                                   g[static_cast<std::size_t>(idx) * classes + term.cls] +=
                                       s * term.jgrad[k] * (fg ? -1.0 : 1.0);
                               }
                       });
}

Var mse(const Var& a, const Var& b)
{
    require_same_size(a, b, "mse");
    const Real count = static_cast<Real>(a.size());
    require(count > 0, "mse: empty input");
    Real total = (as_vec(a.value()) - as_vec(b.value())).squaredNorm();
    return make_result(Tensor::scalar(total / count), {a, b}, [count](Node& n) {
        Node& pa = parent(n, 0);
        Node& pb = parent(n, 1);
        const Real s = 2.0 * n.grad[0] / count;
        if (pa.requires_grad) as_vec(pa.grad_buffer()) += s * (as_vec(pa.value) - as_vec(pb.value));
        if (pb.requires_grad) as_vec(pb.grad_buffer()) -= s * (as_vec(pa.value) - as_vec(pb.value));
    });
}

}  // namespace rw::ag
