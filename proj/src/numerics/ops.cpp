#include "beatforge/ops.hpp"

#include "beatforge/error.hpp"
#include "beatforge/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace beatforge::nn {

namespace {

struct Mat {
    std::size_t rows;
    std::size_t cols;
};

Mat as_matrix(const Tensor& t) {
    if (t.rank() == 1) {
        return {1, t.shape()[0]};
    }
    if (t.rank() == 2) {
        return {t.shape()[0], t.shape()[1]};
    }
    throw DimensionError("expected a matrix, got " + shape_string(t.shape()));
}

Graph& same_graph(Var a, Var b) {
    if (a.graph == nullptr || a.graph != b.graph) {
        throw ContractError("variables belong to different graphs");
    }
    return *a.graph;
}

void add_into(Tensor& dst, const Tensor& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += src[i];
    }
}

}  // namespace

Var matmul(Var a, Var b) {
    Graph& g = same_graph(a, b);
    const auto [m, k] = as_matrix(a.value());
    const auto [k2, n] = as_matrix(b.value());
    if (k != k2) {
        throw DimensionError("matmul inner dimensions differ: " + shape_string(a.shape()) + " * " +
                             shape_string(b.shape()));
    }
    Tensor out = Tensor::matrix(m, n);
    kernels::gemm_nn(a.value().values(), b.value().values(), out.values(), m, k, n, false);
    const std::size_t ia = a.id, ib = b.id;
    return g.record(OpKind::matmul, std::move(out), {ia, ib}, [ia, ib, m, k, n](Graph& gr, std::size_t self) {
        const Tensor& dc = gr.grad(self);
        if (gr.requires_grad(ia)) {
            kernels::gemm_nt(dc.values(), gr.value(ib).values(), gr.grad(ia).values(), m, n, k, true);
        }
        if (gr.requires_grad(ib)) {
            kernels::gemm_tn(gr.value(ia).values(), dc.values(), gr.grad(ib).values(), k, m, n, true);
        }
    });
}

Var matmul_nt(Var a, Var b) {
    Graph& g = same_graph(a, b);
    const auto [m, k] = as_matrix(a.value());
    const auto [n, k2] = as_matrix(b.value());
    if (k != k2) {
        throw DimensionError("matmul_nt inner dimensions differ: " + shape_string(a.shape()) + " * " +
                             shape_string(b.shape()) + "^T");
    }
    Tensor out = Tensor::matrix(m, n);
    kernels::gemm_nt(a.value().values(), b.value().values(), out.values(), m, k, n, false);
    const std::size_t ia = a.id, ib = b.id;
    return g.record(OpKind::matmul_nt, std::move(out), {ia, ib}, [ia, ib, m, k, n](Graph& gr, std::size_t self) {
        const Tensor& dc = gr.grad(self);
        if (gr.requires_grad(ia)) {
            kernels::gemm_nn(dc.values(), gr.value(ib).values(), gr.grad(ia).values(), m, n, k, true);
        }
        if (gr.requires_grad(ib)) {
            kernels::gemm_tn(dc.values(), gr.value(ia).values(), gr.grad(ib).values(), n, m, k, true);
        }
    });
}

Var add(Var a, Var b) {
    Graph& g = same_graph(a, b);
    if (a.shape() != b.shape()) {
        throw DimensionError("add shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    Tensor out = a.value();
    add_into(out, b.value());
    const std::size_t ia = a.id, ib = b.id;
    return g.record(OpKind::add, std::move(out), {ia, ib}, [ia, ib](Graph& gr, std::size_t self) {
        for (std::size_t in : {ia, ib}) {
            if (gr.requires_grad(in)) {
                add_into(gr.grad(in), gr.grad(self));
            }
        }
    });
}

Var mul(Var a, Var b) {
    Graph& g = same_graph(a, b);
    if (a.shape() != b.shape()) {
        throw DimensionError("mul shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= b.value()[i];
    }
    const std::size_t ia = a.id, ib = b.id;
    return g.record(OpKind::mul, std::move(out), {ia, ib}, [ia, ib](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad(self);
        if (gr.requires_grad(ia)) {
            Tensor& da = gr.grad(ia);
            const Tensor& bv = gr.value(ib);
            for (std::size_t i = 0; i < dy.size(); ++i) {
                da[i] += dy[i] * bv[i];
            }
        }
        if (gr.requires_grad(ib)) {
            Tensor& db = gr.grad(ib);
            const Tensor& av = gr.value(ia);
            for (std::size_t i = 0; i < dy.size(); ++i) {
                db[i] += dy[i] * av[i];
            }
        }
    });
}

Var scale(Var a, double s) {
    Tensor out = a.value();
    for (double& v : out.values()) {
        v *= s;
    }
    const std::size_t ia = a.id;
    return a.graph->record(OpKind::scale, std::move(out), {ia}, [ia, s](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad(self);
        Tensor& da = gr.grad(ia);
        for (std::size_t i = 0; i < dy.size(); ++i) {
            da[i] += dy[i] * s;
        }
    });
}

Var add_bias(Var a, Var bias) {
    Graph& g = same_graph(a, bias);
    const auto [m, n] = as_matrix(a.value());
    if (bias.value().size() != n) {
        throw DimensionError("bias length " + std::to_string(bias.value().size()) + " does not match " +
                             std::to_string(n) + " columns");
    }
    Tensor out = a.value();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] += bias.value()[j];
        }
    }
    const std::size_t ia = a.id, ib = bias.id;
    return g.record(OpKind::add_bias, std::move(out), {ia, ib}, [ia, ib, m, n](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad(self);
        if (gr.requires_grad(ia)) {
            add_into(gr.grad(ia), dy);
        }
        if (gr.requires_grad(ib)) {
            Tensor& db = gr.grad(ib);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    db[j] += dy[i * n + j];
                }
            }
        }
    });
}

Var sum(Var a) {
    double total = 0.0;
    for (double v : a.value().values()) {
        total += v;
    }
    const std::size_t ia = a.id;
    return a.graph->record(OpKind::sum, Tensor::scalar(total), {ia}, [ia](Graph& gr, std::size_t self) {
        const double dy = gr.grad(self)[0];
        for (double& v : gr.grad(ia).values()) {
            v += dy;
        }
    });
}

Var mean_rows(Var a) {
    const auto [m, n] = as_matrix(a.value());
    if (m == 0) {
        throw DimensionError("mean_rows of an empty matrix");
    }
    Tensor out = Tensor::matrix(1, n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out[j] += a.value()[i * n + j];
        }
    }
    const double inv = 1.0 / static_cast<double>(m);
    for (double& v : out.values()) {
        v *= inv;
    }
    const std::size_t ia = a.id;
    return a.graph->record(OpKind::mean_rows, std::move(out), {ia}, [ia, m, n, inv](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad(self);
        Tensor& da = gr.grad(ia);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                da[i * n + j] += dy[j] * inv;
            }
        }
    });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
    const auto [m, n] = as_matrix(a.value());
    if (start + count > m) {
        throw DimensionError("slice_rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                             ") out of " + std::to_string(m) + " rows");
    }
    const auto first = a.value().values().begin() + static_cast<std::ptrdiff_t>(start * n);
    Tensor out({count, n}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * n)));
    const std::size_t ia = a.id;
    return a.graph->record(OpKind::slice_rows, std::move(out), {ia}, [ia, start, n](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad(self);
        Tensor& da = gr.grad(ia);
        for (std::size_t i = 0; i < dy.size(); ++i) {
            da[start * n + i] += dy[i];
        }
    });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
    const auto [m, n] = as_matrix(a.value());
    if (start + count > n) {
        throw DimensionError("slice_cols [" + std::to_string(start) + ", " + std::to_string(start + count) +
                             ") out of " + std::to_string(n) + " columns");
    }
    Tensor out = Tensor::matrix(m, count);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < count; ++j) {
            out[i * count + j] = a.value()[i * n + start + j];
        }
    }
    const std::size_t ia = a.id;
    return a.graph->record(OpKind::slice_cols, std::move(out), {ia},
                           [ia, start, count, m, n](Graph& gr, std::size_t self) {
                               const Tensor& dy = gr.grad(self);
                               Tensor& da = gr.grad(ia);
                               for (std::size_t i = 0; i < m; ++i) {
                                   for (std::size_t j = 0; j < count; ++j) {
                                       da[i * n + start + j] += dy[i * count + j];
                                   }
                               }
                           });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) {
        throw DimensionError("concat_rows of nothing");
    }
    Graph& g = *parts.front().graph;
    const std::size_t n = as_matrix(parts.front().value()).cols;
    std::vector<double> data;
    std::vector<std::size_t> ids;
    std::vector<std::size_t> offsets;
    std::size_t m = 0;
    for (const Var& p : parts) {
        same_graph(parts.front(), p);
        const auto shape = as_matrix(p.value());
        if (shape.cols != n) {
            throw DimensionError("concat_rows column mismatch");
        }
        offsets.push_back(m * n);
        m += shape.rows;
        data.insert(data.end(), p.value().values().begin(), p.value().values().end());
        ids.push_back(p.id);
    }
    return g.record(OpKind::concat_rows, Tensor({m, n}, std::move(data)), ids,
                    [ids, offsets](Graph& gr, std::size_t self) {
                        const Tensor& dy = gr.grad(self);
                        for (std::size_t p = 0; p < ids.size(); ++p) {
                            if (!gr.requires_grad(ids[p])) {
                                continue;
                            }
                            Tensor& dp = gr.grad(ids[p]);
                            for (std::size_t i = 0; i < dp.size(); ++i) {
                                dp[i] += dy[offsets[p] + i];
                            }
                        }
                    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) {
        throw DimensionError("concat_cols of nothing");
    }
    Graph& g = *parts.front().graph;
    const std::size_t m = as_matrix(parts.front().value()).rows;
    std::vector<std::size_t> ids, widths, offsets;
    std::size_t n = 0;
    for (const Var& p : parts) {
        same_graph(parts.front(), p);
        const auto shape = as_matrix(p.value());
        if (shape.rows != m) {
            throw DimensionError("concat_cols row mismatch");
        }
        ids.push_back(p.id);
        widths.push_back(shape.cols);
        offsets.push_back(n);
        n += shape.cols;
    }
    Tensor out = Tensor::matrix(m, n);
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const Tensor& v = parts[p].value();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < widths[p]; ++j) {
                out[i * n + offsets[p] + j] = v[i * widths[p] + j];
            }
        }
    }
    return g.record(OpKind::concat_cols, std::move(out), ids,
                    [ids, widths, offsets, m, n](Graph& gr, std::size_t self) {
                        const Tensor& dy = gr.grad(self);
                        for (std::size_t p = 0; p < ids.size(); ++p) {
                            if (!gr.requires_grad(ids[p])) {
                                continue;
                            }
                            Tensor& dp = gr.grad(ids[p]);
                            for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t j = 0; j < widths[p]; ++j) {
                                    dp[i * widths[p] + j] += dy[i * n + offsets[p] + j];
                                }
                            }
                        }
                    });
}

Var gelu(Var a) {
    constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
    constexpr double k = 0.044715;
    Tensor out = a.value();
    for (double& x : out.values()) {
        x = 0.5 * x * (1.0 + std::tanh(c * (x + k * x * x * x)));
    }
    const std::size_t ia = a.id;
    return a.graph->record(OpKind::gelu, std::move(out), {ia}, [ia](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad(self);
        const Tensor& xv = gr.value(ia);
        Tensor& dx = gr.grad(ia);
        for (std::size_t i = 0; i < dy.size(); ++i) {
            const double x = xv[i];
            const double t = std::tanh(c * (x + k * x * x * x));
            const double dt = (1.0 - t * t) * c * (1.0 + 3.0 * k * x * x);
            dx[i] += dy[i] * (0.5 * (1.0 + t) + 0.5 * x * dt);
        }
    });
}

Var softmax(Var a, int axis) {
    const auto [m, n] = as_matrix(a.value());
    if (axis != 0 && axis != 1) {
        throw DimensionError("softmax axis must be 0 or 1");
    }
    // Iterate "lines" along the softmax axis: count lines, each of len elements at stride.
    const std::size_t lines = axis == 1 ? m : n;
    const std::size_t len = axis == 1 ? n : m;
    const std::size_t stride = axis == 1 ? 1 : n;
    const std::size_t line_step = axis == 1 ? n : 1;
    Tensor out = a.value();
    for (std::size_t l = 0; l < lines; ++l) {
        double* base = out.data() + l * line_step;
        double mx = base[0];
        for (std::size_t i = 1; i < len; ++i) {
            mx = std::max(mx, base[i * stride]);
        }
        double total = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            base[i * stride] = std::exp(base[i * stride] - mx);
            total += base[i * stride];
        }
        for (std::size_t i = 0; i < len; ++i) {
            base[i * stride] /= total;
        }
    }
    const std::size_t ia = a.id;
    return a.graph->record(OpKind::softmax, std::move(out), {ia},
                           [ia, lines, len, stride, line_step](Graph& gr, std::size_t self) {
                               const Tensor& y = gr.value(self);
                               const Tensor& dy = gr.grad(self);
                               Tensor& dx = gr.grad(ia);
                               for (std::size_t l = 0; l < lines; ++l) {
                                   const std::size_t base = l * line_step;
                                   double dot = 0.0;
                                   for (std::size_t i = 0; i < len; ++i) {
                                       dot += dy[base + i * stride] * y[base + i * stride];
                                   }
                                   for (std::size_t i = 0; i < len; ++i) {
                                       const std::size_t at = base + i * stride;
                                       dx[at] += y[at] * (dy[at] - dot);
                                   }
                               }
                           });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
    Graph& g = same_graph(x, gain);
    same_graph(x, bias);
    const auto [m, n] = as_matrix(x.value());
    if (n == 0) {
        throw DimensionError("layer_norm over an empty feature axis");
    }
    if (gain.value().size() != n || bias.value().size() != n) {
        throw DimensionError("layer_norm gain/bias length must equal feature width " + std::to_string(n));
    }
    Tensor out = Tensor::matrix(m, n);
    Tensor xhat = Tensor::matrix(m, n);
    std::vector<double> inv_std(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto row = x.value().row(i);
        double mean = 0.0;
        for (double v : row) {
            mean += v;
        }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : row) {
            var += (v - mean) * (v - mean);
        }
        var /= static_cast<double>(n);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            xhat[i * n + j] = (row[j] - mean) * inv_std[i];
            out[i * n + j] = xhat[i * n + j] * gain.value()[j] + bias.value()[j];
        }
    }
    const std::size_t ix = x.id, ig = gain.id, ib = bias.id;
    return g.record(OpKind::layer_norm, std::move(out), {ix, ig, ib},
                    [ix, ig, ib, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& gr,
                                                                                            std::size_t self) {
                        const Tensor& dy = gr.grad(self);
                        const Tensor& gv = gr.value(ig);
                        if (gr.requires_grad(ig)) {
                            Tensor& dg = gr.grad(ig);
                            for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t j = 0; j < n; ++j) {
                                    dg[j] += dy[i * n + j] * xhat[i * n + j];
                                }
                            }
                        }
                        if (gr.requires_grad(ib)) {
                            Tensor& db = gr.grad(ib);
                            for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t j = 0; j < n; ++j) {
                                    db[j] += dy[i * n + j];
                                }
                            }
                        }
                        if (gr.requires_grad(ix)) {
                            Tensor& dx = gr.grad(ix);
                            const double nn = static_cast<double>(n);
                            for (std::size_t i = 0; i < m; ++i) {
                                double sum_d = 0.0;
                                double sum_dx = 0.0;
                                for (std::size_t j = 0; j < n; ++j) {
                                    const double d = dy[i * n + j] * gv[j];
                                    sum_d += d;
                                    sum_dx += d * xhat[i * n + j];
                                }
                                for (std::size_t j = 0; j < n; ++j) {
                                    const double d = dy[i * n + j] * gv[j];
                                    dx[i * n + j] += inv_std[i] / nn * (nn * d - sum_d - xhat[i * n + j] * sum_dx);
                                }
                            }
                        }
                    });
}

Var causal_mask(Var scores) {
    const auto [m, n] = as_matrix(scores.value());
    if (m != n) {
        throw DimensionError("causal_mask needs a square score matrix, got " + shape_string(scores.shape()));
    }
    Tensor out = scores.value();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            out[i * n + j] = kMaskedScore;
        }
    }
    const std::size_t ia = scores.id;
    return scores.graph->record(OpKind::causal_mask, std::move(out), {ia}, [ia, n](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad(self);
        Tensor& dx = gr.grad(ia);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                dx[i * n + j] += dy[i * n + j];
            }
        }
    });
}

Var embedding(Var table, std::span<const std::uint32_t> indices) {
    const auto [v, d] = as_matrix(table.value());
    Tensor out = Tensor::matrix(indices.size(), d);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= v) {
            throw DimensionError("embedding index " + std::to_string(indices[i]) + " out of " + std::to_string(v) +
                                 " rows");
        }
        std::copy_n(table.value().data() + indices[i] * d, d, out.data() + i * d);
    }
    const std::size_t it = table.id;
    std::vector<std::uint32_t> idx(indices.begin(), indices.end());
    return table.graph->record(OpKind::embedding, std::move(out), {it},
                               [it, d, idx = std::move(idx)](Graph& gr, std::size_t self) {
                                   const Tensor& dy = gr.grad(self);
                                   Tensor& dt = gr.grad(it);
                                   for (std::size_t i = 0; i < idx.size(); ++i) {
                                       for (std::size_t j = 0; j < d; ++j) {
                                           dt[idx[i] * d + j] += dy[i * d + j];
                                       }
                                   }
                               });
}

Var spatial_avg_pool(Var x, std::size_t t, std::size_t h, std::size_t w, std::size_t stride) {
    const auto [rows, c] = as_matrix(x.value());
    if (rows != t * h * w) {
        throw DimensionError("spatial_avg_pool expects " + std::to_string(t * h * w) + " tokens, got " +
                             std::to_string(rows));
    }
    if (stride == 0 || h % stride != 0 || w % stride != 0) {
        throw DimensionError("pool stride " + std::to_string(stride) + " does not divide " + std::to_string(h) +
                             "x" + std::to_string(w));
    }
    const std::size_t oh = h / stride, ow = w / stride;
    const double inv = 1.0 / static_cast<double>(stride * stride);
    Tensor out = Tensor::matrix(t * oh * ow, c);
    auto src_row = [=](std::size_t f, std::size_t y, std::size_t xx) { return (f * h + y) * w + xx; };
    for (std::size_t f = 0; f < t; ++f) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double* dst = out.data() + ((f * oh + oy) * ow + ox) * c;
                for (std::size_t dy = 0; dy < stride; ++dy) {
                    for (std::size_t dx = 0; dx < stride; ++dx) {
                        const double* src = x.value().data() + src_row(f, oy * stride + dy, ox * stride + dx) * c;
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            dst[ch] += src[ch];
                        }
                    }
                }
                for (std::size_t ch = 0; ch < c; ++ch) {
                    dst[ch] *= inv;
                }
            }
        }
    }
    const std::size_t ix = x.id;
    return x.graph->record(
        OpKind::spatial_avg_pool, std::move(out), {ix}, [=](Graph& gr, std::size_t self) {
            const Tensor& dyv = gr.grad(self);
            Tensor& dxv = gr.grad(ix);
            for (std::size_t f = 0; f < t; ++f) {
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const double* g = dyv.data() + ((f * oh + oy) * ow + ox) * c;
                        for (std::size_t dy = 0; dy < stride; ++dy) {
                            for (std::size_t dx = 0; dx < stride; ++dx) {
                                double* dst = dxv.data() + src_row(f, oy * stride + dy, ox * stride + dx) * c;
                                for (std::size_t ch = 0; ch < c; ++ch) {
                                    dst[ch] += g[ch] * inv;
                                }
                            }
                        }
                    }
                }
            }
        });
}

Var normalize_rows(Var a, double eps) {
    const auto [m, n] = as_matrix(a.value());
    Tensor out = a.value();
    std::vector<double> norms(m);
    for (std::size_t i = 0; i < m; ++i) {
        double sq = 0.0;
        for (double v : a.value().row(i)) {
            sq += v * v;
        }
        norms[i] = std::sqrt(sq);
        if (!(norms[i] > eps)) {
            throw NumericError("cosine similarity undefined: row " + std::to_string(i) + " has norm " +
                               std::to_string(norms[i]));
        }
        for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] /= norms[i];
        }
    }
    const std::size_t ia = a.id;
    return a.graph->record(OpKind::normalize_rows, std::move(out), {ia},
                           [ia, m, n, norms = std::move(norms)](Graph& gr, std::size_t self) {
                               const Tensor& y = gr.value(self);
                               const Tensor& dy = gr.grad(self);
                               Tensor& dx = gr.grad(ia);
                               for (std::size_t i = 0; i < m; ++i) {
                                   double dot = 0.0;
                                   for (std::size_t j = 0; j < n; ++j) {
                                       dot += dy[i * n + j] * y[i * n + j];
                                   }
                                   for (std::size_t j = 0; j < n; ++j) {
                                       dx[i * n + j] += (dy[i * n + j] - y[i * n + j] * dot) / norms[i];
                                   }
                               }
                           });
}

Var cross_entropy(Var logits, std::span<const std::int32_t> targets, std::span<const double> weights,
                  double normalizer) {
    const auto [m, c] = as_matrix(logits.value());
    if (targets.size() != m || weights.size() != m) {
        throw DimensionError("cross_entropy: " + std::to_string(m) + " rows but " + std::to_string(targets.size()) +
                             " targets and " + std::to_string(weights.size()) + " weights");
    }
    if (!(normalizer > 0.0)) {
        throw ContractError("cross_entropy normalizer must be positive");
    }
    Tensor probs = Tensor::matrix(m, c);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const auto row = logits.value().row(i);
        double mx = row[0];
        for (double v : row) {
            mx = std::max(mx, v);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            probs[i * c + j] = std::exp(row[j] - mx);
            z += probs[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) {
            probs[i * c + j] /= z;
        }
        if (targets[i] < 0) {
            continue;
        }
        if (static_cast<std::size_t>(targets[i]) >= c) {
            throw DimensionError("cross_entropy target " + std::to_string(targets[i]) + " out of " +
                                 std::to_string(c) + " classes");
        }
        const double nll = mx + std::log(z) - row[static_cast<std::size_t>(targets[i])];
        total += weights[i] * nll;
    }
    std::vector<std::int32_t> tgt(targets.begin(), targets.end());
    std::vector<double> w(weights.begin(), weights.end());
    const std::size_t il = logits.id;
    return logits.graph->record(
        OpKind::cross_entropy, Tensor::scalar(total / normalizer), {il},
        [il, m, c, normalizer, probs = std::move(probs), tgt = std::move(tgt), w = std::move(w)](Graph& gr,
                                                                                                 std::size_t self) {
            const double g = gr.grad(self)[0];
            Tensor& dx = gr.grad(il);
            for (std::size_t i = 0; i < m; ++i) {
                if (tgt[i] < 0) {
                    continue;
                }
                const double coef = g * w[i] / normalizer;
                for (std::size_t j = 0; j < c; ++j) {
                    const double onehot = static_cast<std::size_t>(tgt[i]) == j ? 1.0 : 0.0;
                    dx[i * c + j] += coef * (probs[i * c + j] - onehot);
                }
            }
        });
}

}  // namespace beatforge::nn
