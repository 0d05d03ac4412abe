#include "hypnos/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace hypnos::ad {

Tensor& Node::g() {
    if (grad.numel() == 0) grad = Tensor::zeros(val.shape());
    return grad;
}

Var constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = false;
    return n;
}

Var leaf(Tensor t, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = requires_grad;
    return n;
}

namespace {

Var make(Tensor val, std::vector<Var> parents, std::function<void(Node&)> bp) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->parents = std::move(parents);
    bool req = false;
    for (const auto& p : n->parents) req = req || p->requires_grad;
    n->requires_grad = req;
    if (req) n->backprop = std::move(bp);
    return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->val.same_shape(b->val))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a->val.shape_str() +
                                    " vs " + b->val.shape_str());
}

}  // namespace

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += b->val[i];
    return make(std::move(out), {a, b}, [](Node& n) {
        for (int k = 0; k < 2; ++k) {
            auto& p = n.parents[k];
            if (!p->requires_grad) continue;
            Tensor& g = p->g();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] -= b->val[i];
    return make(std::move(out), {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) {
            Tensor& g = n.parents[0]->g();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
        }
        if (n.parents[1]->requires_grad) {
            Tensor& g = n.parents[1]->g();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] -= n.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= b->val[i];
    return make(std::move(out), {a, b}, [](Node& n) {
        const Tensor& av = n.parents[0]->val;
        const Tensor& bv = n.parents[1]->val;
        if (n.parents[0]->requires_grad) {
            Tensor& g = n.parents[0]->g();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * bv[i];
        }
        if (n.parents[1]->requires_grad) {
            Tensor& g = n.parents[1]->g();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * av[i];
        }
    });
}

Var scale(const Var& a, double c) {
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= c;
    return make(std::move(out), {a}, [c](Node& n) {
        Tensor& g = n.parents[0]->g();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += c * n.grad[i];
    });
}

Var add_scalar(const Var& a, double c) {
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += c;
    return make(std::move(out), {a}, [](Node& n) {
        Tensor& g = n.parents[0]->g();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    });
}

Var relu(const Var& a) {
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::max(0.0, out[i]);
    return make(std::move(out), {a}, [](Node& n) {
        const Tensor& x = n.parents[0]->val;
        Tensor& g = n.parents[0]->g();
        for (std::int64_t i = 0; i < g.numel(); ++i)
            if (x[i] > 0.0) g[i] += n.grad[i];
    });
}

Var sigmoid(const Var& a) {
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    auto n = make(std::move(out), {a}, [](Node& n) {
        Tensor& g = n.parents[0]->g();
        for (std::int64_t i = 0; i < g.numel(); ++i) {
            const double s = n.val[i];
            g[i] += n.grad[i] * s * (1.0 - s);
        }
    });
    return n;
}

Var silu(const Var& a) {
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-out[i]));
        out[i] = out[i] * s;
    }
    return make(std::move(out), {a}, [](Node& n) {
        const Tensor& x = n.parents[0]->val;
        Tensor& g = n.parents[0]->g();
        for (std::int64_t i = 0; i < g.numel(); ++i) {
            const double s = 1.0 / (1.0 + std::exp(-x[i]));
            g[i] += n.grad[i] * (s + x[i] * s * (1.0 - s));
        }
    });
}

Var exp_(const Var& a) {
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
    return make(std::move(out), {a}, [](Node& n) {
        Tensor& g = n.parents[0]->g();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * n.val[i];
    });
}

Var sum(const Var& a) {
    double s = 0.0;
    for (std::int64_t i = 0; i < a->val.numel(); ++i) s += a->val[i];
    return make(Tensor::scalar(s), {a}, [](Node& n) {
        Tensor& g = n.parents[0]->g();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[0];
    });
}

Var mean(const Var& a) {
    const double inv = 1.0 / static_cast<double>(a->val.numel());
    double s = 0.0;
    for (std::int64_t i = 0; i < a->val.numel(); ++i) s += a->val[i];
    return make(Tensor::scalar(s * inv), {a}, [inv](Node& n) {
        Tensor& g = n.parents[0]->g();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[0] * inv;
    });
}

Var mse(const Var& a, const Var& b) {
    check_same_shape(a, b, "mse");
    const double inv = 1.0 / static_cast<double>(a->val.numel());
    double s = 0.0;
    for (std::int64_t i = 0; i < a->val.numel(); ++i) {
        const double d = a->val[i] - b->val[i];
        s += d * d;
    }
    return make(Tensor::scalar(s * inv), {a, b}, [inv](Node& n) {
        const Tensor& av = n.parents[0]->val;
        const Tensor& bv = n.parents[1]->val;
        for (int k = 0; k < 2; ++k) {
            auto& p = n.parents[k];
            if (!p->requires_grad) continue;
            Tensor& g = p->g();
            const double sgn = (k == 0) ? 1.0 : -1.0;
            for (std::int64_t i = 0; i < g.numel(); ++i)
                g[i] += sgn * 2.0 * inv * (av[i] - bv[i]) * n.grad[0];
        }
    });
}

Var matmul(const Var& a, const Var& b) {
    const int m = a->val.dim(0), k = a->val.dim(1), n2 = b->val.dim(1);
    if (b->val.dim(0) != k) throw std::invalid_argument("matmul: inner dim mismatch");
    Tensor out({m, n2});
    for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) {
            const double av = a->val.at2(i, kk);
            for (int j = 0; j < n2; ++j) out.at2(i, j) += av * b->val.at2(kk, j);
        }
    return make(std::move(out), {a, b}, [m, k, n2](Node& n) {
        const Tensor& av = n.parents[0]->val;
        const Tensor& bv = n.parents[1]->val;
        if (n.parents[0]->requires_grad) {
            Tensor& ga = n.parents[0]->g();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n2; ++j) {
                    const double gv = n.grad.at2(i, j);
                    for (int kk = 0; kk < k; ++kk) ga.at2(i, kk) += gv * bv.at2(kk, j);
                }
        }
        if (n.parents[1]->requires_grad) {
            Tensor& gb = n.parents[1]->g();
            for (int i = 0; i < m; ++i)
                for (int kk = 0; kk < k; ++kk) {
                    const double av2 = av.at2(i, kk);
                    for (int j = 0; j < n2; ++j) gb.at2(kk, j) += av2 * n.grad.at2(i, j);
                }
        }
    });
}

Var matvec(const Var& w, const Var& x) {
    const int m = w->val.dim(0), k = w->val.dim(1);
    if (x->val.numel() != k) throw std::invalid_argument("matvec: dim mismatch");
    Tensor out({m});
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < k; ++j) s += w->val.at2(i, j) * x->val[j];
        out[i] = s;
    }
    return make(std::move(out), {w, x}, [m, k](Node& n) {
        const Tensor& wv = n.parents[0]->val;
        const Tensor& xv = n.parents[1]->val;
        if (n.parents[0]->requires_grad) {
            Tensor& gw = n.parents[0]->g();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < k; ++j) gw.at2(i, j) += n.grad[i] * xv[j];
        }
        if (n.parents[1]->requires_grad) {
            Tensor& gx = n.parents[1]->g();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < k; ++j) gx[j] += n.grad[i] * wv.at2(i, j);
        }
    });
}

Var transpose(const Var& a) {
    const int m = a->val.dim(0), n2 = a->val.dim(1);
    Tensor out({n2, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n2; ++j) out.at2(j, i) = a->val.at2(i, j);
    return make(std::move(out), {a}, [m, n2](Node& n) {
        Tensor& g = n.parents[0]->g();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n2; ++j) g.at2(i, j) += n.grad.at2(j, i);
    });
}

Var add_rowvec(const Var& x, const Var& v) {
    const int t = x->val.dim(0), d = x->val.dim(1);
    if (v->val.numel() != d) throw std::invalid_argument("add_rowvec: dim mismatch");
    Tensor out = x->val;
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < d; ++j) out.at2(i, j) += v->val[j];
    return make(std::move(out), {x, v}, [t, d](Node& n) {
        if (n.parents[0]->requires_grad) {
            Tensor& g = n.parents[0]->g();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
        }
        if (n.parents[1]->requires_grad) {
            Tensor& g = n.parents[1]->g();
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < d; ++j) g[j] += n.grad.at2(i, j);
        }
    });
}

Var softmax_rows(const Var& a) {
    const int m = a->val.dim(0), n2 = a->val.dim(1);
    Tensor out = a->val;
    for (int i = 0; i < m; ++i) {
        double mx = out.at2(i, 0);
        for (int j = 1; j < n2; ++j) mx = std::max(mx, out.at2(i, j));
        double s = 0.0;
        for (int j = 0; j < n2; ++j) {
            out.at2(i, j) = std::exp(out.at2(i, j) - mx);
            s += out.at2(i, j);
        }
        for (int j = 0; j < n2; ++j) out.at2(i, j) /= s;
    }
    return make(std::move(out), {a}, [m, n2](Node& n) {
        Tensor& g = n.parents[0]->g();
        for (int i = 0; i < m; ++i) {
            double dot = 0.0;
            for (int j = 0; j < n2; ++j) dot += n.grad.at2(i, j) * n.val.at2(i, j);
            for (int j = 0; j < n2; ++j)
                g.at2(i, j) += n.val.at2(i, j) * (n.grad.at2(i, j) - dot);
        }
    });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const int t = x->val.dim(0), d = x->val.dim(1);
    Tensor out({t, d});
    Tensor mu({t}), inv_sd({t});
    for (int i = 0; i < t; ++i) {
        double m = 0.0;
        for (int j = 0; j < d; ++j) m += x->val.at2(i, j);
        m /= d;
        double v = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = x->val.at2(i, j) - m;
            v += c * c;
        }
        v /= d;
        mu[i] = m;
        inv_sd[i] = 1.0 / std::sqrt(v + eps);
        for (int j = 0; j < d; ++j)
            out.at2(i, j) = (x->val.at2(i, j) - m) * inv_sd[i] * gamma->val[j] + beta->val[j];
    }
    auto mu_c = std::make_shared<Tensor>(std::move(mu));
    auto isd_c = std::make_shared<Tensor>(std::move(inv_sd));
    return make(std::move(out), {x, gamma, beta}, [t, d, mu_c, isd_c](Node& n) {
        const Tensor& xv = n.parents[0]->val;
        const Tensor& gv = n.parents[1]->val;
        for (int i = 0; i < t; ++i) {
            const double isd = (*isd_c)[i];
            const double m = (*mu_c)[i];
            // dL/dxhat for the row, plus reductions for the mean/var terms
            double sum_dxh = 0.0, sum_dxh_xh = 0.0;
            for (int j = 0; j < d; ++j) {
                const double xh = (xv.at2(i, j) - m) * isd;
                const double dxh = n.grad.at2(i, j) * gv[j];
                sum_dxh += dxh;
                sum_dxh_xh += dxh * xh;
            }
            if (n.parents[0]->requires_grad) {
                Tensor& gx = n.parents[0]->g();
                for (int j = 0; j < d; ++j) {
                    const double xh = (xv.at2(i, j) - m) * isd;
                    const double dxh = n.grad.at2(i, j) * gv[j];
                    gx.at2(i, j) += isd * (dxh - sum_dxh / d - xh * sum_dxh_xh / d);
                }
            }
            if (n.parents[1]->requires_grad) {
                Tensor& gg = n.parents[1]->g();
                for (int j = 0; j < d; ++j) {
                    const double xh = (xv.at2(i, j) - m) * isd;
                    gg[j] += n.grad.at2(i, j) * xh;
                }
            }
            if (n.parents[2]->requires_grad) {
                Tensor& gb = n.parents[2]->g();
                for (int j = 0; j < d; ++j) gb[j] += n.grad.at2(i, j);
            }
        }
    });
}

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const int ic = x->val.dim(0), h = x->val.dim(1), wd = x->val.dim(2);
    const int oc = w->val.dim(0), kh = w->val.dim(2), kw = w->val.dim(3);
    if (w->val.dim(1) != ic) throw std::invalid_argument("conv2d: channel mismatch");
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (wd + 2 * pad - kw) / stride + 1;
    Tensor out({oc, oh, ow});
    const auto widx = [ic, kh, kw](int o, int i, int u, int v) {
        return ((static_cast<std::int64_t>(o) * ic + i) * kh + u) * kw + v;
    };
    for (int o = 0; o < oc; ++o)
        for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx) {
                double s = b ? b->val[o] : 0.0;
                for (int i = 0; i < ic; ++i)
                    for (int u = 0; u < kh; ++u) {
                        const int sy = y * stride + u - pad;
                        if (sy < 0 || sy >= h) continue;
                        for (int v = 0; v < kw; ++v) {
                            const int sx = xx * stride + v - pad;
                            if (sx < 0 || sx >= wd) continue;
                            s += x->val.at3(i, sy, sx) * w->val[widx(o, i, u, v)];
                        }
                    }
                out.at3(o, y, xx) = s;
            }
    std::vector<Var> parents = {x, w};
    if (b) parents.push_back(b);
    return make(std::move(out), std::move(parents),
                [ic, h, wd, oc, kh, kw, stride, pad, oh, ow, widx](Node& n) {
        const Var& px = n.parents[0];
        const Var& pw = n.parents[1];
        const bool has_b = n.parents.size() == 3;
        for (int o = 0; o < oc; ++o)
            for (int y = 0; y < oh; ++y)
                for (int xx = 0; xx < ow; ++xx) {
                    const double gv = n.grad.at3(o, y, xx);
                    if (gv == 0.0) continue;
                    for (int i = 0; i < ic; ++i)
                        for (int u = 0; u < kh; ++u) {
                            const int sy = y * stride + u - pad;
                            if (sy < 0 || sy >= h) continue;
                            for (int v = 0; v < kw; ++v) {
                                const int sx = xx * stride + v - pad;
                                if (sx < 0 || sx >= wd) continue;
                                if (px->requires_grad)
                                    px->g().at3(i, sy, sx) += gv * pw->val[widx(o, i, u, v)];
                                if (pw->requires_grad)
                                    pw->g()[widx(o, i, u, v)] += gv * px->val.at3(i, sy, sx);
                            }
                        }
                    if (has_b && n.parents[2]->requires_grad) n.parents[2]->g()[o] += gv;
                }
    });
}

Var depthwise_conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const int c = x->val.dim(0), h = x->val.dim(1), wd = x->val.dim(2);
    const int kh = w->val.dim(2), kw = w->val.dim(3);
    if (w->val.dim(0) != c || w->val.dim(1) != 1)
        throw std::invalid_argument("depthwise_conv2d: weight shape must be [C,1,kh,kw]");
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (wd + 2 * pad - kw) / stride + 1;
    Tensor out({c, oh, ow});
    const auto widx = [kh, kw](int ch, int u, int v) {
        return (static_cast<std::int64_t>(ch) * kh + u) * kw + v;
    };
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx) {
                double s = b ? b->val[ch] : 0.0;
                for (int u = 0; u < kh; ++u) {
                    const int sy = y * stride + u - pad;
                    if (sy < 0 || sy >= h) continue;
                    for (int v = 0; v < kw; ++v) {
                        const int sx = xx * stride + v - pad;
                        if (sx < 0 || sx >= wd) continue;
                        s += x->val.at3(ch, sy, sx) * w->val[widx(ch, u, v)];
                    }
                }
                out.at3(ch, y, xx) = s;
            }
    std::vector<Var> parents = {x, w};
    if (b) parents.push_back(b);
    return make(std::move(out), std::move(parents),
                [c, h, wd, kh, kw, stride, pad, oh, ow, widx](Node& n) {
        const Var& px = n.parents[0];
        const Var& pw = n.parents[1];
        const bool has_b = n.parents.size() == 3;
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < oh; ++y)
                for (int xx = 0; xx < ow; ++xx) {
                    const double gv = n.grad.at3(ch, y, xx);
                    if (gv == 0.0) continue;
                    for (int u = 0; u < kh; ++u) {
                        const int sy = y * stride + u - pad;
                        if (sy < 0 || sy >= h) continue;
                        for (int v = 0; v < kw; ++v) {
                            const int sx = xx * stride + v - pad;
                            if (sx < 0 || sx >= wd) continue;
                            if (px->requires_grad)
                                px->g().at3(ch, sy, sx) += gv * pw->val[widx(ch, u, v)];
                            if (pw->requires_grad)
                                pw->g()[widx(ch, u, v)] += gv * px->val.at3(ch, sy, sx);
                        }
                    }
                    if (has_b && n.parents[2]->requires_grad) n.parents[2]->g()[ch] += gv;
                }
    });
}

Var concat_rows(const Var& a, const Var& b) {
    const int ma = a->val.dim(0), mb = b->val.dim(0), d = a->val.dim(1);
    if (b->val.dim(1) != d) throw std::invalid_argument("concat_rows: width mismatch");
    Tensor out({ma + mb, d});
    std::copy(a->val.data(), a->val.data() + a->val.numel(), out.data());
    std::copy(b->val.data(), b->val.data() + b->val.numel(), out.data() + a->val.numel());
    return make(std::move(out), {a, b}, [](Node& n) {
        const std::int64_t na = n.parents[0]->val.numel();
        if (n.parents[0]->requires_grad) {
            Tensor& g = n.parents[0]->g();
            for (std::int64_t i = 0; i < na; ++i) g[i] += n.grad[i];
        }
        if (n.parents[1]->requires_grad) {
            Tensor& g = n.parents[1]->g();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[na + i];
        }
    });
}

Var add_chan_bias(const Var& x, const Var& bias) {
    const int c = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
    if (bias->val.numel() != c) throw std::invalid_argument("add_chan_bias: dim mismatch");
    Tensor out = x->val;
    for (int i = 0; i < c; ++i)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) out.at3(i, y, xx) += bias->val[i];
    return make(std::move(out), {x, bias}, [c, h, w](Node& n) {
        if (n.parents[0]->requires_grad) {
            Tensor& g = n.parents[0]->g();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
        }
        if (n.parents[1]->requires_grad) {
            Tensor& g = n.parents[1]->g();
            for (int i = 0; i < c; ++i)
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < w; ++xx) g[i] += n.grad.at3(i, y, xx);
        }
    });
}

Var concat_chan(const Var& a, const Var& b) {
    const int ca = a->val.dim(0), cb = b->val.dim(0);
    const int h = a->val.dim(1), w = a->val.dim(2);
    if (b->val.dim(1) != h || b->val.dim(2) != w)
        throw std::invalid_argument("concat_chan: spatial mismatch");
    Tensor out({ca + cb, h, w});
    std::copy(a->val.data(), a->val.data() + a->val.numel(), out.data());
    std::copy(b->val.data(), b->val.data() + b->val.numel(), out.data() + a->val.numel());
    return make(std::move(out), {a, b}, [](Node& n) {
        const std::int64_t na = n.parents[0]->val.numel();
        if (n.parents[0]->requires_grad) {
            Tensor& g = n.parents[0]->g();
            for (std::int64_t i = 0; i < na; ++i) g[i] += n.grad[i];
        }
        if (n.parents[1]->requires_grad) {
            Tensor& g = n.parents[1]->g();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[na + i];
        }
    });
}

Var global_avg_pool(const Var& x) {
    const int c = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
    const double inv = 1.0 / (h * w);
    Tensor out({c});
    for (int i = 0; i < c; ++i) {
        double s = 0.0;
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) s += x->val.at3(i, y, xx);
        out[i] = s * inv;
    }
    return make(std::move(out), {x}, [c, h, w, inv](Node& n) {
        Tensor& g = n.parents[0]->g();
        for (int i = 0; i < c; ++i)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx) g.at3(i, y, xx) += n.grad[i] * inv;
    });
}

Var patches(const Var& x, int p) {
    const int c = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
    if (h % p != 0 || w % p != 0) throw std::invalid_argument("patches: size not divisible");
    const int gh = h / p, gw = w / p;
    const int n_patches = gh * gw, d = c * p * p;
    Tensor out({n_patches, d});
    for (int py = 0; py < gh; ++py)
        for (int px = 0; px < gw; ++px) {
            const int pi = py * gw + px;
            int k = 0;
            for (int i = 0; i < c; ++i)
                for (int u = 0; u < p; ++u)
                    for (int v = 0; v < p; ++v)
                        out.at2(pi, k++) = x->val.at3(i, py * p + u, px * p + v);
        }
    return make(std::move(out), {x}, [c, p, gh, gw](Node& n) {
        Tensor& g = n.parents[0]->g();
        for (int py = 0; py < gh; ++py)
            for (int px = 0; px < gw; ++px) {
                const int pi = py * gw + px;
                int k = 0;
                for (int i = 0; i < c; ++i)
                    for (int u = 0; u < p; ++u)
                        for (int v = 0; v < p; ++v)
                            g.at3(i, py * p + u, px * p + v) += n.grad.at2(pi, k++);
            }
    });
}

Var reshape(const Var& a, std::vector<int> shape) {
    if (shape_numel(shape) != a->val.numel()) throw std::invalid_argument("reshape: numel mismatch");
    Tensor out(shape, std::vector<double>(a->val.data(), a->val.data() + a->val.numel()));
    return make(std::move(out), {a}, [](Node& n) {
        Tensor& g = n.parents[0]->g();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    });
}

Var rows_mean(const Var& table, const std::vector<int>& idx) {
    if (idx.empty()) throw std::invalid_argument("rows_mean: empty index list");
    const int d = table->val.dim(1);
    const double inv = 1.0 / static_cast<double>(idx.size());
    Tensor out({d});
    for (int r : idx)
        for (int j = 0; j < d; ++j) out[j] += table->val.at2(r, j) * inv;
    auto ids = idx;
    return make(std::move(out), {table}, [ids, d, inv](Node& n) {
        Tensor& g = n.parents[0]->g();
        for (int r : ids)
            for (int j = 0; j < d; ++j) g.at2(r, j) += n.grad[j] * inv;
    });
}

Var row(const Var& a, int r) {
    const int d = a->val.dim(1);
    Tensor out({d});
    for (int j = 0; j < d; ++j) out[j] = a->val.at2(r, j);
    return make(std::move(out), {a}, [r, d](Node& n) {
        Tensor& g = n.parents[0]->g();
        for (int j = 0; j < d; ++j) g.at2(r, j) += n.grad[j];
    });
}

Var clamp01(const Var& a) {
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::clamp(out[i], 0.0, 1.0);
    return make(std::move(out), {a}, [](Node& n) {
        const Tensor& x = n.parents[0]->val;
        Tensor& g = n.parents[0]->g();
        for (std::int64_t i = 0; i < g.numel(); ++i)
            if (x[i] > 0.0 && x[i] < 1.0) g[i] += n.grad[i];
    });
}

void backward(const Var& root) {
    if (root->val.numel() != 1) throw std::logic_error("backward: root must be scalar");
    // Topological order by iterative DFS.
    std::vector<Var> order;
    std::vector<std::pair<Var, size_t>> stack;
    // Atomic so independent graphs can run backward on separate threads; the
    // marks themselves live on thread-private nodes.
    static std::atomic<int> epoch_counter{0};
    const int epoch = epoch_counter.fetch_add(1, std::memory_order_relaxed) + 1;
    stack.emplace_back(root, 0);
    root->visit_mark = epoch;
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Var p = node->parents[next++];
            if (p->visit_mark != epoch && p->requires_grad) {
                p->visit_mark = epoch;
                stack.emplace_back(std::move(p), 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->g()[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto& n = *it;
        if (n->backprop) {
            n->g();  // make sure grad exists even if nothing flowed in
            n->backprop(*n);
        }
    }
}

}  // namespace hypnos::ad
