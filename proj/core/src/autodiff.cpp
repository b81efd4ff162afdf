#include "cdk/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace cdk {

namespace {
inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// Valid output range so that the input index i = o*stride - pad + koff
// stays inside [0, in).
inline void conv_bounds(int in, int out, int stride, int pad, int koff, int& lo, int& hi) {
    lo = 0;
    while (lo < out && lo * stride - pad + koff < 0) ++lo;
    hi = out - 1;
    while (hi >= 0 && hi * stride - pad + koff >= in) --hi;
}
}  // namespace

void matmul_accumulate(const float* a, const float* b, float* out, int n, int k, int m,
                       bool accumulate) {
    if (!accumulate)
        for (int i = 0; i < n * m; ++i) out[i] = 0.0f;
    for (int i = 0; i < n; ++i) {
        const float* arow = a + static_cast<std::size_t>(i) * k;
        float* orow = out + static_cast<std::size_t>(i) * m;
        for (int kk = 0; kk < k; ++kk) {
            const float av = arow[kk];
            if (av == 0.0f) continue;
            const float* brow = b + static_cast<std::size_t>(kk) * m;
            for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
}

int Tape::push(TensorF value, bool needs_grad, std::function<void(Tape&, int)> backprop) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(TensorF value, bool needs_grad) {
    return push(std::move(value), needs_grad, nullptr);
}

TensorF& Tape::grad_buf(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad_ready) {
        n.grad = TensorF::zeros(n.value.shape());
        n.grad_ready = true;
    }
    return n.grad;
}

void Tape::accumulate(int id, const TensorF& g) {
    TensorF& buf = grad_buf(id);
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

const TensorF& Tape::grad(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad_ready) throw std::logic_error("tape: gradient not computed for node");
    return n.grad;
}

void Tape::backward(int node) {
    Node& out = nodes_[static_cast<std::size_t>(node)];
    if (out.value.size() != 1) throw std::logic_error("tape: backward needs a scalar node");
    grad_buf(node)[0] = 1.0f;
    for (int id = node; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.grad_ready || !n.backprop || !n.needs_grad) continue;
        n.backprop(*this, id);
    }
}

int Tape::add(int a, int b) {
    require_same_shape(value(a), value(b), "tape add");
    TensorF out = cdk::add(value(a), value(b));
    const bool ng = needs_grad(a) || needs_grad(b);
    return push(std::move(out), ng, [a, b](Tape& t, int self) {
        const TensorF& g = t.grad(self);
        if (t.needs_grad(a)) t.accumulate(a, g);
        if (t.needs_grad(b)) t.accumulate(b, g);
    });
}

int Tape::scale(int a, float s) {
    TensorF out = cdk::scale(value(a), s);
    return push(std::move(out), needs_grad(a), [a, s](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        const TensorF& g = t.grad(self);
        TensorF& ga = t.grad_buf(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * g[i];
    });
}

int Tape::swish(int x) {
    const TensorF& xv = value(x);
    TensorF out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * sigmoid(xv[i]);
    return push(std::move(out), needs_grad(x), [x](Tape& t, int self) {
        if (!t.needs_grad(x)) return;
        const TensorF& g = t.grad(self);
        const TensorF& xv = t.value(x);
        TensorF& gx = t.grad_buf(x);
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const float s = sigmoid(xv[i]);
            gx[i] += g[i] * s * (1.0f + xv[i] * (1.0f - s));
        }
    });
}

int Tape::add_channel_bias(int x, int b) {
    const TensorF& xv = value(x);
    const TensorF& bv = value(b);
    if (xv.rank() != 3 || bv.rank() != 1 || bv.dim(0) != xv.dim(0))
        throw std::invalid_argument("tape add_channel_bias: want x [C,H,W], b [C]");
    const int C = xv.dim(0), HW = xv.dim(1) * xv.dim(2);
    TensorF out(xv.shape());
    for (int c = 0; c < C; ++c) {
        const float beta = bv[static_cast<std::size_t>(c)];
        for (int i = 0; i < HW; ++i)
            out[static_cast<std::size_t>(c) * HW + i] = xv[static_cast<std::size_t>(c) * HW + i] + beta;
    }
    const bool ng = needs_grad(x) || needs_grad(b);
    return push(std::move(out), ng, [x, b, C, HW](Tape& t, int self) {
        const TensorF& g = t.grad(self);
        if (t.needs_grad(x)) t.accumulate(x, g);
        if (t.needs_grad(b)) {
            TensorF& gb = t.grad_buf(b);
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int i = 0; i < HW; ++i) acc += g[static_cast<std::size_t>(c) * HW + i];
                gb[static_cast<std::size_t>(c)] += static_cast<float>(acc);
            }
        }
    });
}

int Tape::add_col_bias(int a, int b) {
    const TensorF& av = value(a);
    const TensorF& bv = value(b);
    if (av.rank() != 2 || bv.rank() != 1 || bv.dim(0) != av.dim(1))
        throw std::invalid_argument("tape add_col_bias: want a [N,M], b [M]");
    const int N = av.dim(0), M = av.dim(1);
    TensorF out(av.shape());
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < M; ++j)
            out[static_cast<std::size_t>(i) * M + j] =
                av[static_cast<std::size_t>(i) * M + j] + bv[static_cast<std::size_t>(j)];
    const bool ng = needs_grad(a) || needs_grad(b);
    return push(std::move(out), ng, [a, b, N, M](Tape& t, int self) {
        const TensorF& g = t.grad(self);
        if (t.needs_grad(a)) t.accumulate(a, g);
        if (t.needs_grad(b)) {
            TensorF& gb = t.grad_buf(b);
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < M; ++j)
                    gb[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i) * M + j];
        }
    });
}

int Tape::add_row_const(int a, const TensorF& v) {
    const TensorF& av = value(a);
    if (av.rank() != 2 || v.rank() != 1 || v.dim(0) != av.dim(1))
        throw std::invalid_argument("tape add_row_const: want a [N,M], v [M]");
    const int N = av.dim(0), M = av.dim(1);
    TensorF out(av.shape());
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < M; ++j)
            out[static_cast<std::size_t>(i) * M + j] =
                av[static_cast<std::size_t>(i) * M + j] + v[static_cast<std::size_t>(j)];
    return push(std::move(out), needs_grad(a), [a](Tape& t, int self) {
        if (t.needs_grad(a)) t.accumulate(a, t.grad(self));
    });
}

int Tape::conv2d(int x, int w, int b, int stride, int pad) {
    const TensorF& xv = value(x);
    const TensorF& wv = value(w);
    const TensorF& bv = value(b);
    if (xv.rank() != 3 || wv.rank() != 4)
        throw std::invalid_argument("tape conv2d: want x [C,H,W], w [Co,Ci,K,K]");
    const int Ci = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    const int Co = wv.dim(0), K = wv.dim(2);
    if (wv.dim(1) != Ci || wv.dim(3) != K || bv.rank() != 1 || bv.dim(0) != Co)
        throw std::invalid_argument("tape conv2d: weight/bias shape mismatch");
    const int Ho = conv_out_dim(H, K, stride, pad);
    const int Wo = conv_out_dim(W, K, stride, pad);
    if (Ho <= 0 || Wo <= 0) throw std::invalid_argument("tape conv2d: empty output");

    TensorF out({Co, Ho, Wo});
    for (int co = 0; co < Co; ++co) {
        float* oc = out.data() + static_cast<std::size_t>(co) * Ho * Wo;
        const float bias = bv[static_cast<std::size_t>(co)];
        for (int i = 0; i < Ho * Wo; ++i) oc[i] = bias;
        for (int ci = 0; ci < Ci; ++ci) {
            const float* ic = xv.data() + static_cast<std::size_t>(ci) * H * W;
            for (int ky = 0; ky < K; ++ky) {
                int ylo, yhi;
                conv_bounds(H, Ho, stride, pad, ky, ylo, yhi);
                for (int kx = 0; kx < K; ++kx) {
                    const float wgt =
                        wv[((static_cast<std::size_t>(co) * Ci + ci) * K + ky) * K + kx];
                    if (wgt == 0.0f) continue;
                    int xlo, xhi;
                    conv_bounds(W, Wo, stride, pad, kx, xlo, xhi);
                    for (int y = ylo; y <= yhi; ++y) {
                        const int iy = y * stride - pad + ky;
                        float* orow = oc + static_cast<std::size_t>(y) * Wo;
                        const float* irow = ic + static_cast<std::size_t>(iy) * W - pad + kx;
                        if (stride == 1) {
                            for (int xo = xlo; xo <= xhi; ++xo) orow[xo] += wgt * irow[xo];
                        } else {
                            for (int xo = xlo; xo <= xhi; ++xo)
                                orow[xo] += wgt * irow[xo * stride];
                        }
                    }
                }
            }
        }
    }

    const bool ng = needs_grad(x) || needs_grad(w) || needs_grad(b);
    return push(std::move(out), ng, [x, w, b, stride, pad, Ci, H, W, Co, K, Ho, Wo](
                                        Tape& t, int self) {
        const TensorF& g = t.grad(self);
        const TensorF& xv = t.value(x);
        const TensorF& wv = t.value(w);
        if (t.needs_grad(b)) {
            TensorF& gb = t.grad_buf(b);
            for (int co = 0; co < Co; ++co) {
                double acc = 0.0;
                const float* gc = g.data() + static_cast<std::size_t>(co) * Ho * Wo;
                for (int i = 0; i < Ho * Wo; ++i) acc += gc[i];
                gb[static_cast<std::size_t>(co)] += static_cast<float>(acc);
            }
        }
        const bool need_x = t.needs_grad(x);
        const bool need_w = t.needs_grad(w);
        if (!need_x && !need_w) return;
        TensorF* gx = need_x ? &t.grad_buf(x) : nullptr;
        TensorF* gw = need_w ? &t.grad_buf(w) : nullptr;
        for (int co = 0; co < Co; ++co) {
            const float* gc = g.data() + static_cast<std::size_t>(co) * Ho * Wo;
            for (int ci = 0; ci < Ci; ++ci) {
                const float* ic = xv.data() + static_cast<std::size_t>(ci) * H * W;
                float* gic = need_x ? gx->data() + static_cast<std::size_t>(ci) * H * W : nullptr;
                for (int ky = 0; ky < K; ++ky) {
                    int ylo, yhi;
                    conv_bounds(H, Ho, stride, pad, ky, ylo, yhi);
                    for (int kx = 0; kx < K; ++kx) {
                        int xlo, xhi;
                        conv_bounds(W, Wo, stride, pad, kx, xlo, xhi);
                        const std::size_t widx =
                            ((static_cast<std::size_t>(co) * Ci + ci) * K + ky) * K + kx;
                        const float wgt = wv[widx];
                        double wacc = 0.0;
                        for (int y = ylo; y <= yhi; ++y) {
                            const int iy = y * stride - pad + ky;
                            const float* grow = gc + static_cast<std::size_t>(y) * Wo;
                            const std::size_t ioff = static_cast<std::size_t>(iy) * W - pad + kx;
                            if (need_w) {
                                const float* irow = ic + ioff;
                                if (stride == 1) {
                                    for (int xo = xlo; xo <= xhi; ++xo)
                                        wacc += static_cast<double>(grow[xo]) * irow[xo];
                                } else {
                                    for (int xo = xlo; xo <= xhi; ++xo)
                                        wacc += static_cast<double>(grow[xo]) * irow[xo * stride];
                                }
                            }
                            if (need_x && wgt != 0.0f) {
                                float* grow_in = gic + ioff;
                                if (stride == 1) {
                                    for (int xo = xlo; xo <= xhi; ++xo)
                                        grow_in[xo] += wgt * grow[xo];
                                } else {
                                    for (int xo = xlo; xo <= xhi; ++xo)
                                        grow_in[xo * stride] += wgt * grow[xo];
                                }
                            }
                        }
                        if (need_w) (*gw)[widx] += static_cast<float>(wacc);
                    }
                }
            }
        }
    });
}

int Tape::upsample_nearest(int x, int factor) {
    const TensorF& xv = value(x);
    if (xv.rank() != 3 || factor < 1)
        throw std::invalid_argument("tape upsample_nearest: want x [C,H,W], factor >= 1");
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    const int Ho = H * factor, Wo = W * factor;
    TensorF out({C, Ho, Wo});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < Ho; ++y) {
            const float* irow =
                xv.data() + (static_cast<std::size_t>(c) * H + y / factor) * W;
            float* orow = out.data() + (static_cast<std::size_t>(c) * Ho + y) * Wo;
            for (int xo = 0; xo < Wo; ++xo) orow[xo] = irow[xo / factor];
        }
    return push(std::move(out), needs_grad(x), [x, factor, C, H, W](Tape& t, int self) {
        if (!t.needs_grad(x)) return;
        const TensorF& g = t.grad(self);
        TensorF& gx = t.grad_buf(x);
        const int Ho = H * factor, Wo = W * factor;
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < Ho; ++y) {
                float* grow_in = gx.data() + (static_cast<std::size_t>(c) * H + y / factor) * W;
                const float* grow = g.data() + (static_cast<std::size_t>(c) * Ho + y) * Wo;
                for (int xo = 0; xo < Wo; ++xo) grow_in[xo / factor] += grow[xo];
            }
    });
}

int Tape::group_norm(int x, int gamma, int beta, int groups, float eps) {
    const TensorF& xv = value(x);
    const TensorF& gv = value(gamma);
    const TensorF& bv = value(beta);
    if (xv.rank() != 3) throw std::invalid_argument("tape group_norm: want x [C,H,W]");
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    if (groups < 1 || C % groups != 0)
        throw std::invalid_argument("tape group_norm: groups must divide channels");
    if (gv.rank() != 1 || gv.dim(0) != C || bv.rank() != 1 || bv.dim(0) != C)
        throw std::invalid_argument("tape group_norm: gamma/beta must be [C]");
    const int gs = C / groups;          // channels per group
    const int n = gs * H * W;           // elements per group
    const int HW = H * W;

    TensorF out(xv.shape());
    std::vector<float> mu(static_cast<std::size_t>(groups));
    std::vector<float> inv_sd(static_cast<std::size_t>(groups));
    for (int g = 0; g < groups; ++g) {
        const float* base = xv.data() + static_cast<std::size_t>(g) * gs * HW;
        double m = 0.0;
        for (int i = 0; i < n; ++i) m += base[i];
        m /= n;
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = base[i] - m;
            var += d * d;
        }
        var /= n;
        mu[static_cast<std::size_t>(g)] = static_cast<float>(m);
        inv_sd[static_cast<std::size_t>(g)] = static_cast<float>(1.0 / std::sqrt(var + eps));
    }
    for (int c = 0; c < C; ++c) {
        const int g = c / gs;
        const float m = mu[static_cast<std::size_t>(g)];
        const float is = inv_sd[static_cast<std::size_t>(g)];
        const float ga = gv[static_cast<std::size_t>(c)];
        const float be = bv[static_cast<std::size_t>(c)];
        const float* in = xv.data() + static_cast<std::size_t>(c) * HW;
        float* o = out.data() + static_cast<std::size_t>(c) * HW;
        for (int i = 0; i < HW; ++i) o[i] = ga * (in[i] - m) * is + be;
    }

    const bool ng = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
    return push(std::move(out), ng,
                [x, gamma, beta, groups, gs, n, C, HW, mu, inv_sd](Tape& t, int self) {
        const TensorF& g = t.grad(self);
        const TensorF& xv = t.value(x);
        const TensorF& gv = t.value(gamma);
        if (t.needs_grad(gamma) || t.needs_grad(beta)) {
            for (int c = 0; c < C; ++c) {
                const int grp = c / gs;
                const float m = mu[static_cast<std::size_t>(grp)];
                const float is = inv_sd[static_cast<std::size_t>(grp)];
                const float* in = xv.data() + static_cast<std::size_t>(c) * HW;
                const float* gr = g.data() + static_cast<std::size_t>(c) * HW;
                double dg = 0.0, db = 0.0;
                for (int i = 0; i < HW; ++i) {
                    dg += static_cast<double>(gr[i]) * (in[i] - m) * is;
                    db += gr[i];
                }
                if (t.needs_grad(gamma))
                    t.grad_buf(gamma)[static_cast<std::size_t>(c)] += static_cast<float>(dg);
                if (t.needs_grad(beta))
                    t.grad_buf(beta)[static_cast<std::size_t>(c)] += static_cast<float>(db);
            }
        }
        if (!t.needs_grad(x)) return;
        TensorF& gx = t.grad_buf(x);
        for (int grp = 0; grp < groups; ++grp) {
            const float m = mu[static_cast<std::size_t>(grp)];
            const float is = inv_sd[static_cast<std::size_t>(grp)];
            const float* xbase = xv.data() + static_cast<std::size_t>(grp) * gs * HW;
            const float* gbase = g.data() + static_cast<std::size_t>(grp) * gs * HW;
            float* gxbase = gx.data() + static_cast<std::size_t>(grp) * gs * HW;
            // ghat = upstream grad through the affine, per element
            double sum_gh = 0.0, sum_gh_xh = 0.0;
            for (int c = 0; c < gs; ++c) {
                const float ga = gv[static_cast<std::size_t>(grp * gs + c)];
                const float* in = xbase + static_cast<std::size_t>(c) * HW;
                const float* gr = gbase + static_cast<std::size_t>(c) * HW;
                for (int i = 0; i < HW; ++i) {
                    const double gh = static_cast<double>(gr[i]) * ga;
                    sum_gh += gh;
                    sum_gh_xh += gh * (in[i] - m) * is;
                }
            }
            const float mean_gh = static_cast<float>(sum_gh / n);
            const float mean_gh_xh = static_cast<float>(sum_gh_xh / n);
            for (int c = 0; c < gs; ++c) {
                const float ga = gv[static_cast<std::size_t>(grp * gs + c)];
                const float* in = xbase + static_cast<std::size_t>(c) * HW;
                const float* gr = gbase + static_cast<std::size_t>(c) * HW;
                float* gxr = gxbase + static_cast<std::size_t>(c) * HW;
                for (int i = 0; i < HW; ++i) {
                    const float xh = (in[i] - m) * is;
                    gxr[i] += is * (gr[i] * ga - mean_gh - xh * mean_gh_xh);
                }
            }
        }
    });
}

int Tape::matmul(int a, int b) {
    const TensorF& av = value(a);
    const TensorF& bv = value(b);
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
        throw std::invalid_argument("tape matmul: shape mismatch");
    const int N = av.dim(0), K = av.dim(1), M = bv.dim(1);
    TensorF out({N, M});
    matmul_accumulate(av.data(), bv.data(), out.data(), N, K, M, false);
    const bool ng = needs_grad(a) || needs_grad(b);
    return push(std::move(out), ng, [a, b, N, K, M](Tape& t, int self) {
        const TensorF& g = t.grad(self);
        if (t.needs_grad(a)) {
            // ga[n,k] += sum_m g[n,m] * b[k,m]
            const TensorF& bv = t.value(b);
            TensorF& ga = t.grad_buf(a);
            for (int i = 0; i < N; ++i) {
                const float* grow = g.data() + static_cast<std::size_t>(i) * M;
                float* garow = ga.data() + static_cast<std::size_t>(i) * K;
                for (int kk = 0; kk < K; ++kk) {
                    const float* brow = bv.data() + static_cast<std::size_t>(kk) * M;
                    double acc = 0.0;
                    for (int j = 0; j < M; ++j) acc += static_cast<double>(grow[j]) * brow[j];
                    garow[kk] += static_cast<float>(acc);
                }
            }
        }
        if (t.needs_grad(b)) {
            // gb[k,m] += sum_n a[n,k] * g[n,m]
            const TensorF& av = t.value(a);
            TensorF& gb = t.grad_buf(b);
            for (int i = 0; i < N; ++i) {
                const float* arow = av.data() + static_cast<std::size_t>(i) * K;
                const float* grow = g.data() + static_cast<std::size_t>(i) * M;
                for (int kk = 0; kk < K; ++kk) {
                    const float aval = arow[kk];
                    if (aval == 0.0f) continue;
                    float* gbrow = gb.data() + static_cast<std::size_t>(kk) * M;
                    for (int j = 0; j < M; ++j) gbrow[j] += aval * grow[j];
                }
            }
        }
    });
}

int Tape::transpose(int a) {
    const TensorF& av = value(a);
    if (av.rank() != 2) throw std::invalid_argument("tape transpose: want [N,M]");
    const int N = av.dim(0), M = av.dim(1);
    TensorF out({M, N});
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < M; ++j)
            out[static_cast<std::size_t>(j) * N + i] = av[static_cast<std::size_t>(i) * M + j];
    return push(std::move(out), needs_grad(a), [a, N, M](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        const TensorF& g = t.grad(self);
        TensorF& ga = t.grad_buf(a);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < M; ++j)
                ga[static_cast<std::size_t>(i) * M + j] += g[static_cast<std::size_t>(j) * N + i];
    });
}

int Tape::reshape(int a, std::vector<int> shape) {
    TensorF out = value(a).reshaped(shape);
    return push(std::move(out), needs_grad(a), [a](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        const TensorF& g = t.grad(self);
        TensorF& ga = t.grad_buf(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    });
}

int Tape::softmax_rows(int a) {
    const TensorF& av = value(a);
    if (av.rank() != 2) throw std::invalid_argument("tape softmax_rows: want [N,M]");
    const int N = av.dim(0), M = av.dim(1);
    TensorF out(av.shape());
    for (int i = 0; i < N; ++i) {
        const float* row = av.data() + static_cast<std::size_t>(i) * M;
        float* orow = out.data() + static_cast<std::size_t>(i) * M;
        float mx = row[0];
        for (int j = 1; j < M; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < M; ++j) {
            orow[j] = std::exp(row[j] - mx);
            z += orow[j];
        }
        const float inv = static_cast<float>(1.0 / z);
        for (int j = 0; j < M; ++j) orow[j] *= inv;
    }
    return push(std::move(out), needs_grad(a), [a, N, M](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        const TensorF& g = t.grad(self);
        const TensorF& y = t.value(self);
        TensorF& ga = t.grad_buf(a);
        for (int i = 0; i < N; ++i) {
            const float* grow = g.data() + static_cast<std::size_t>(i) * M;
            const float* yrow = y.data() + static_cast<std::size_t>(i) * M;
            float* garow = ga.data() + static_cast<std::size_t>(i) * M;
            double dotp = 0.0;
            for (int j = 0; j < M; ++j) dotp += static_cast<double>(grow[j]) * yrow[j];
            for (int j = 0; j < M; ++j)
                garow[j] += yrow[j] * (grow[j] - static_cast<float>(dotp));
        }
    });
}

int Tape::linear(int x, int w, int b) {
    const TensorF& xv = value(x);
    const TensorF& wv = value(w);
    const TensorF& bv = value(b);
    if (xv.rank() != 1 || wv.rank() != 2 || wv.dim(0) != xv.dim(0) || bv.rank() != 1 ||
        bv.dim(0) != wv.dim(1))
        throw std::invalid_argument("tape linear: want x [N], w [N,M], b [M]");
    const int N = xv.dim(0), M = wv.dim(1);
    TensorF out({M});
    for (int j = 0; j < M; ++j) out[static_cast<std::size_t>(j)] = bv[static_cast<std::size_t>(j)];
    for (int i = 0; i < N; ++i) {
        const float xval = xv[static_cast<std::size_t>(i)];
        if (xval == 0.0f) continue;
        const float* wrow = wv.data() + static_cast<std::size_t>(i) * M;
        for (int j = 0; j < M; ++j) out[static_cast<std::size_t>(j)] += xval * wrow[j];
    }
    const bool ng = needs_grad(x) || needs_grad(w) || needs_grad(b);
    return push(std::move(out), ng, [x, w, b, N, M](Tape& t, int self) {
        const TensorF& g = t.grad(self);
        if (t.needs_grad(b)) t.accumulate(b, g);
        if (t.needs_grad(w)) {
            const TensorF& xv = t.value(x);
            TensorF& gw = t.grad_buf(w);
            for (int i = 0; i < N; ++i) {
                const float xval = xv[static_cast<std::size_t>(i)];
                if (xval == 0.0f) continue;
                float* gwrow = gw.data() + static_cast<std::size_t>(i) * M;
                for (int j = 0; j < M; ++j) gwrow[j] += xval * g[static_cast<std::size_t>(j)];
            }
        }
        if (t.needs_grad(x)) {
            const TensorF& wv = t.value(w);
            TensorF& gx = t.grad_buf(x);
            for (int i = 0; i < N; ++i) {
                const float* wrow = wv.data() + static_cast<std::size_t>(i) * M;
                double acc = 0.0;
                for (int j = 0; j < M; ++j)
                    acc += static_cast<double>(wrow[j]) * g[static_cast<std::size_t>(j)];
                gx[static_cast<std::size_t>(i)] += static_cast<float>(acc);
            }
        }
    });
}

int Tape::mse(int a, const TensorF& target) {
    const TensorF& av = value(a);
    require_same_shape(av, target, "tape mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double d = static_cast<double>(av[i]) - static_cast<double>(target[i]);
        acc += d * d;
    }
    const double n = static_cast<double>(av.size());
    TensorF out({1});
    out[0] = static_cast<float>(acc / n);
    return push(std::move(out), needs_grad(a), [a, target, n](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        const float gs = t.grad(self)[0];
        const TensorF& av = t.value(a);
        TensorF& ga = t.grad_buf(a);
        const float c = static_cast<float>(2.0 / n) * gs;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * (av[i] - target[i]);
    });
}

int Tape::mean_all(int a) {
    const TensorF& av = value(a);
    const double n = static_cast<double>(av.size());
    TensorF out({1});
    out[0] = static_cast<float>(sum(av) / n);
    return push(std::move(out), needs_grad(a), [a, n](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        const float c = t.grad(self)[0] / static_cast<float>(n);
        TensorF& ga = t.grad_buf(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c;
    });
}

}  // namespace cdk
