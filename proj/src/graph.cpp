#include "dix/graph.hpp"

#include "dix/errors.hpp"

#include <cmath>

namespace dix::graph {

NodeRef Tape::leaf(Tensor value, bool needs_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->needs_grad = needs_grad;
    nodes_.push_back(n);
    return n;
}

NodeRef Tape::make(Tensor value, std::vector<NodeRef> inputs, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->inputs = std::move(inputs);
    n->backprop = std::move(backprop);
    for (const auto& in : n->inputs)
        if (in->needs_grad) n->needs_grad = true;
    nodes_.push_back(n);
    return n;
}

void Tape::backward(const NodeRef& root, std::size_t seed_index) {
    if (seed_index >= root->value.size())
        throw addressing_error("backward seed index out of range");
    root->ensure_grad()[seed_index] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = **it;
        if (!n.needs_grad || !n.backprop) continue;
        if (!n.grad.same_shape(n.value)) continue; // nothing flowed here
        n.backprop(n);
    }
}

namespace {

inline Tensor& grad_of(const NodeRef& n) { return n->ensure_grad(); }

inline void check_same(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw addressing_error(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                               b.shape_string());
}

} // namespace

NodeRef add(Tape& t, const NodeRef& a, const NodeRef& b) {
    check_same(a->value, b->value, "add");
    Tensor out = dix::add(a->value, b->value);
    return t.make(std::move(out), {a, b}, [a, b](Node& n) {
        Tensor& ga = grad_of(a);
        Tensor& gb = grad_of(b);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            ga[i] += n.grad[i];
            gb[i] += n.grad[i];
        }
    });
}

NodeRef mul(Tape& t, const NodeRef& a, const NodeRef& b) {
    check_same(a->value, b->value, "mul");
    Tensor out = hadamard(a->value, b->value);
    return t.make(std::move(out), {a, b}, [a, b](Node& n) {
        Tensor& ga = grad_of(a);
        Tensor& gb = grad_of(b);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            ga[i] += n.grad[i] * b->value[i];
            gb[i] += n.grad[i] * a->value[i];
        }
    });
}

NodeRef scale(Tape& t, const NodeRef& a, double s) {
    Tensor out = dix::scale(a->value, s);
    return t.make(std::move(out), {a}, [a, s](Node& n) {
        Tensor& ga = grad_of(a);
        for (std::size_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i] * s;
    });
}

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
} // namespace

NodeRef gelu(Tape& t, const NodeRef& a) {
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = out[i];
        out[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    }
    return t.make(std::move(out), {a}, [a](Node& n) {
        Tensor& ga = grad_of(a);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            const double x = a->value[i];
            const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
            ga[i] += n.grad[i] * (cdf + x * pdf);
        }
    });
}

NodeRef reshape(Tape& t, const NodeRef& a, std::vector<std::size_t> shape) {
    Tensor out = a->value.reshaped(std::move(shape));
    return t.make(std::move(out), {a}, [a](Node& n) {
        Tensor& ga = grad_of(a);
        for (std::size_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i];
    });
}

NodeRef affine(Tape& t, const NodeRef& x, const NodeRef& w, const NodeRef& b) {
    const Tensor& xv = x->value;
    const Tensor& wv = w->value;
    const Tensor& bv = b->value;
    if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1 || xv.dim(1) != wv.dim(1) ||
        wv.dim(0) != bv.dim(0))
        throw addressing_error("affine: incompatible shapes " + xv.shape_string() + " " +
                               wv.shape_string() + " " + bv.shape_string());
    const std::size_t n_rows = xv.dim(0), d_in = xv.dim(1), d_out = wv.dim(0);
    Tensor out({n_rows, d_out});
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t o = 0; o < d_out; ++o) {
            double s = bv[o];
            for (std::size_t i = 0; i < d_in; ++i) s += xv.at(r, i) * wv.at(o, i);
            out.at(r, o) = s;
        }
    return t.make(std::move(out), {x, w, b}, [x, w, b, n_rows, d_in, d_out](Node& n) {
        Tensor& gx = grad_of(x);
        Tensor& gw = grad_of(w);
        Tensor& gb = grad_of(b);
        for (std::size_t r = 0; r < n_rows; ++r)
            for (std::size_t o = 0; o < d_out; ++o) {
                const double g = n.grad.at(r, o);
                gb[o] += g;
                for (std::size_t i = 0; i < d_in; ++i) {
                    gx.at(r, i) += g * w->value.at(o, i);
                    gw.at(o, i) += g * x->value.at(r, i);
                }
            }
    });
}

NodeRef affine_vec(Tape& t, const NodeRef& x, const NodeRef& w, const NodeRef& b) {
    auto row = reshape(t, x, {1, x->value.size()});
    auto out = affine(t, row, w, b);
    return reshape(t, out, {w->value.dim(0)});
}

NodeRef conv2d(Tape& t, const NodeRef& x, const NodeRef& w, const NodeRef& b, std::size_t stride,
               std::size_t pad) {
    const Tensor& xv = x->value;
    const Tensor& wv = w->value;
    if (xv.rank() != 3 || wv.rank() != 4 || xv.dim(0) != wv.dim(1))
        throw addressing_error("conv2d: incompatible shapes " + xv.shape_string() + " vs " +
                               wv.shape_string());
    const std::size_t c_in = xv.dim(0), h = xv.dim(1), wdt = xv.dim(2);
    const std::size_t f = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
    const std::size_t ow = (wdt + 2 * pad - kw) / stride + 1;
    Tensor out({f, oh, ow});
    auto in_range = [](std::ptrdiff_t v, std::size_t bound) {
        return v >= 0 && v < static_cast<std::ptrdiff_t>(bound);
    };
    for (std::size_t of = 0; of < f; ++of)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double s = b->value[of];
                for (std::size_t ci = 0; ci < c_in; ++ci)
                    for (std::size_t ky = 0; ky < kh; ++ky)
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                static_cast<std::ptrdiff_t>(pad);
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                static_cast<std::ptrdiff_t>(pad);
                            if (in_range(iy, h) && in_range(ix, wdt))
                                s += xv.at(ci, static_cast<std::size_t>(iy),
                                           static_cast<std::size_t>(ix)) *
                                     wv.at(of, ci, ky, kx);
                        }
                out.at(of, oy, ox) = s;
            }
    return t.make(std::move(out), {x, w, b},
                  [x, w, b, c_in, h, wdt, f, kh, kw, oh, ow, stride, pad, in_range](Node& n) {
                      Tensor& gx = grad_of(x);
                      Tensor& gw = grad_of(w);
                      Tensor& gb = grad_of(b);
                      for (std::size_t of = 0; of < f; ++of)
                          for (std::size_t oy = 0; oy < oh; ++oy)
                              for (std::size_t ox = 0; ox < ow; ++ox) {
                                  const double g = n.grad.at(of, oy, ox);
                                  gb[of] += g;
                                  for (std::size_t ci = 0; ci < c_in; ++ci)
                                      for (std::size_t ky = 0; ky < kh; ++ky)
                                          for (std::size_t kx = 0; kx < kw; ++kx) {
                                              const std::ptrdiff_t iy =
                                                  static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                                  static_cast<std::ptrdiff_t>(pad);
                                              const std::ptrdiff_t ix =
                                                  static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                                  static_cast<std::ptrdiff_t>(pad);
                                              if (!in_range(iy, h) || !in_range(ix, wdt)) continue;
                                              const std::size_t uy = static_cast<std::size_t>(iy);
                                              const std::size_t ux = static_cast<std::size_t>(ix);
                                              gx.at(ci, uy, ux) += g * w->value.at(of, ci, ky, kx);
                                              gw.at(of, ci, ky, kx) += g * x->value.at(ci, uy, ux);
                                          }
                              }
                  });
}

NodeRef global_avg_pool(Tape& t, const NodeRef& x) {
    const Tensor& xv = x->value;
    if (xv.rank() != 3) throw addressing_error("global_avg_pool expects (C,H,W)");
    const std::size_t c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    const double inv = 1.0 / static_cast<double>(h * w);
    Tensor out({c});
    for (std::size_t ci = 0; ci < c; ++ci) {
        double s = 0.0;
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) s += xv.at(ci, i, j);
        out[ci] = s * inv;
    }
    return t.make(std::move(out), {x}, [x, c, h, w, inv](Node& n) {
        Tensor& gx = grad_of(x);
        for (std::size_t ci = 0; ci < c; ++ci) {
            const double g = n.grad[ci] * inv;
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j) gx.at(ci, i, j) += g;
        }
    });
}

NodeRef layer_norm(Tape& t, const NodeRef& x, const NodeRef& gamma, const NodeRef& beta,
                   double eps) {
    const Tensor& xv = x->value;
    if (xv.rank() != 2 || gamma->value.dim(0) != xv.dim(1) || beta->value.dim(0) != xv.dim(1))
        throw addressing_error("layer_norm: incompatible shapes");
    const std::size_t rows = xv.dim(0), d = xv.dim(1);
    Tensor out({rows, d});
    std::vector<double> means(rows), inv_stds(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (std::size_t i = 0; i < d; ++i) mean += xv.at(r, i);
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double c = xv.at(r, i) - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv_std = 1.0 / std::sqrt(var + eps);
        means[r] = mean;
        inv_stds[r] = inv_std;
        for (std::size_t i = 0; i < d; ++i)
            out.at(r, i) = (xv.at(r, i) - mean) * inv_std * gamma->value[i] + beta->value[i];
    }
    return t.make(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, rows, d, means, inv_stds](Node& n) {
                      Tensor& gx = grad_of(x);
                      Tensor& gg = grad_of(gamma);
                      Tensor& gb = grad_of(beta);
                      for (std::size_t r = 0; r < rows; ++r) {
                          const double inv_std = inv_stds[r];
                          // dL/dxhat, plus the two row-sums the norm backward needs
                          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                          std::vector<double> dxhat(d), xhat(d);
                          for (std::size_t i = 0; i < d; ++i) {
                              xhat[i] = (x->value.at(r, i) - means[r]) * inv_std;
                              const double g = n.grad.at(r, i);
                              gg[i] += g * xhat[i];
                              gb[i] += g;
                              dxhat[i] = g * gamma->value[i];
                              sum_dxhat += dxhat[i];
                              sum_dxhat_xhat += dxhat[i] * xhat[i];
                          }
                          const double inv_d = 1.0 / static_cast<double>(d);
                          for (std::size_t i = 0; i < d; ++i)
                              gx.at(r, i) += inv_std * (dxhat[i] - inv_d * sum_dxhat -
                                                        inv_d * xhat[i] * sum_dxhat_xhat);
                      }
                  });
}

NodeRef split_heads(Tape& t, const NodeRef& x, std::size_t heads) {
    const Tensor& xv = x->value;
    if (xv.rank() != 2 || xv.dim(1) % heads != 0)
        throw addressing_error("split_heads: feature dim not divisible by head count");
    const std::size_t tok = xv.dim(0), d = xv.dim(1), dh = d / heads;
    Tensor out({heads, tok, dh});
    for (std::size_t hh = 0; hh < heads; ++hh)
        for (std::size_t r = 0; r < tok; ++r)
            for (std::size_t i = 0; i < dh; ++i) out.at(hh, r, i) = xv.at(r, hh * dh + i);
    return t.make(std::move(out), {x}, [x, heads, tok, dh](Node& n) {
        Tensor& gx = grad_of(x);
        for (std::size_t hh = 0; hh < heads; ++hh)
            for (std::size_t r = 0; r < tok; ++r)
                for (std::size_t i = 0; i < dh; ++i)
                    gx.at(r, hh * dh + i) += n.grad.at(hh, r, i);
    });
}

NodeRef merge_heads(Tape& t, const NodeRef& x) {
    const Tensor& xv = x->value;
    if (xv.rank() != 3) throw addressing_error("merge_heads expects (H,T,Dh)");
    const std::size_t heads = xv.dim(0), tok = xv.dim(1), dh = xv.dim(2);
    Tensor out({tok, heads * dh});
    for (std::size_t hh = 0; hh < heads; ++hh)
        for (std::size_t r = 0; r < tok; ++r)
            for (std::size_t i = 0; i < dh; ++i) out.at(r, hh * dh + i) = xv.at(hh, r, i);
    return t.make(std::move(out), {x}, [x, heads, tok, dh](Node& n) {
        Tensor& gx = grad_of(x);
        for (std::size_t hh = 0; hh < heads; ++hh)
            for (std::size_t r = 0; r < tok; ++r)
                for (std::size_t i = 0; i < dh; ++i)
                    gx.at(hh, r, i) += n.grad.at(r, hh * dh + i);
    });
}

NodeRef scaled_qk(Tape& t, const NodeRef& q, const NodeRef& k) {
    const Tensor& qv = q->value;
    const Tensor& kv = k->value;
    if (qv.rank() != 3 || !qv.same_shape(kv)) throw addressing_error("scaled_qk: shape mismatch");
    const std::size_t heads = qv.dim(0), tok = qv.dim(1), dh = qv.dim(2);
    const double s = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor out({heads, tok, tok});
    for (std::size_t hh = 0; hh < heads; ++hh)
        for (std::size_t r = 0; r < tok; ++r)
            for (std::size_t c = 0; c < tok; ++c) {
                double acc = 0.0;
                for (std::size_t i = 0; i < dh; ++i) acc += qv.at(hh, r, i) * kv.at(hh, c, i);
                out.at(hh, r, c) = acc * s;
            }
    return t.make(std::move(out), {q, k}, [q, k, heads, tok, dh, s](Node& n) {
        Tensor& gq = grad_of(q);
        Tensor& gk = grad_of(k);
        for (std::size_t hh = 0; hh < heads; ++hh)
            for (std::size_t r = 0; r < tok; ++r)
                for (std::size_t c = 0; c < tok; ++c) {
                    const double g = n.grad.at(hh, r, c) * s;
                    for (std::size_t i = 0; i < dh; ++i) {
                        gq.at(hh, r, i) += g * k->value.at(hh, c, i);
                        gk.at(hh, c, i) += g * q->value.at(hh, r, i);
                    }
                }
    });
}

NodeRef softmax_lastdim(Tape& t, const NodeRef& x) {
    const Tensor& xv = x->value;
    if (xv.rank() < 1) throw addressing_error("softmax_lastdim: rank-0 input");
    const std::size_t d = xv.shape().back();
    const std::size_t rows = xv.size() / d;
    Tensor out = xv;
    for (std::size_t r = 0; r < rows; ++r) {
        double* p = out.data() + r * d;
        double mx = p[0];
        for (std::size_t i = 1; i < d; ++i) mx = std::max(mx, p[i]);
        double sum = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            p[i] = std::exp(p[i] - mx);
            sum += p[i];
        }
        for (std::size_t i = 0; i < d; ++i) p[i] /= sum;
    }
    return t.make(std::move(out), {x}, [x, rows, d](Node& n) {
        Tensor& gx = grad_of(x);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = n.value.data() + r * d;
            const double* g = n.grad.data() + r * d;
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) dot += y[i] * g[i];
            double* out_g = gx.data() + r * d;
            for (std::size_t i = 0; i < d; ++i) out_g[i] += y[i] * (g[i] - dot);
        }
    });
}

NodeRef attn_apply(Tape& t, const NodeRef& a, const NodeRef& v) {
    const Tensor& av = a->value;
    const Tensor& vv = v->value;
    if (av.rank() != 3 || vv.rank() != 3 || av.dim(0) != vv.dim(0) || av.dim(2) != vv.dim(1))
        throw addressing_error("attn_apply: incompatible shapes " + av.shape_string() + " vs " +
                               vv.shape_string());
    const std::size_t heads = av.dim(0), tok = av.dim(1), dh = vv.dim(2);
    Tensor out({heads, tok, dh});
    for (std::size_t hh = 0; hh < heads; ++hh)
        for (std::size_t r = 0; r < tok; ++r)
            for (std::size_t i = 0; i < dh; ++i) {
                double acc = 0.0;
                for (std::size_t c = 0; c < tok; ++c)
                    acc += av.at(hh, r, c) * vv.at(hh, c, i);
                out.at(hh, r, i) = acc;
            }
    return t.make(std::move(out), {a, v}, [a, v, heads, tok, dh](Node& n) {
        Tensor& ga = grad_of(a);
        Tensor& gv = grad_of(v);
        for (std::size_t hh = 0; hh < heads; ++hh)
            for (std::size_t r = 0; r < tok; ++r)
                for (std::size_t i = 0; i < dh; ++i) {
                    const double g = n.grad.at(hh, r, i);
                    for (std::size_t c = 0; c < tok; ++c) {
                        ga.at(hh, r, c) += g * v->value.at(hh, c, i);
                        gv.at(hh, c, i) += g * a->value.at(hh, r, c);
                    }
                }
    });
}

NodeRef concat_rows(Tape& t, const NodeRef& a, const NodeRef& b) {
    const Tensor& av = a->value;
    const Tensor& bv = b->value;
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1))
        throw addressing_error("concat_rows: column mismatch");
    const std::size_t ra = av.dim(0), rb = bv.dim(0), d = av.dim(1);
    Tensor out({ra + rb, d});
    for (std::size_t r = 0; r < ra; ++r)
        for (std::size_t i = 0; i < d; ++i) out.at(r, i) = av.at(r, i);
    for (std::size_t r = 0; r < rb; ++r)
        for (std::size_t i = 0; i < d; ++i) out.at(ra + r, i) = bv.at(r, i);
    return t.make(std::move(out), {a, b}, [a, b, ra, rb, d](Node& n) {
        Tensor& ga = grad_of(a);
        Tensor& gb = grad_of(b);
        for (std::size_t r = 0; r < ra; ++r)
            for (std::size_t i = 0; i < d; ++i) ga.at(r, i) += n.grad.at(r, i);
        for (std::size_t r = 0; r < rb; ++r)
            for (std::size_t i = 0; i < d; ++i) gb.at(r, i) += n.grad.at(ra + r, i);
    });
}

NodeRef slice_row(Tape& t, const NodeRef& x, std::size_t row) {
    const Tensor& xv = x->value;
    if (xv.rank() != 2 || row >= xv.dim(0)) throw addressing_error("slice_row: out of range");
    const std::size_t d = xv.dim(1);
    Tensor out({d});
    for (std::size_t i = 0; i < d; ++i) out[i] = xv.at(row, i);
    return t.make(std::move(out), {x}, [x, row, d](Node& n) {
        Tensor& gx = grad_of(x);
        for (std::size_t i = 0; i < d; ++i) gx.at(row, i) += n.grad[i];
    });
}

NodeRef cross_entropy(Tape& t, const NodeRef& scores, std::size_t label) {
    const Tensor& sv = scores->value;
    if (sv.rank() != 1 || label >= sv.size())
        throw addressing_error("cross_entropy: bad label or score shape");
    const std::size_t k = sv.size();
    double mx = sv[0];
    for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, sv[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += std::exp(sv[i] - mx);
    const double log_z = mx + std::log(sum);
    Tensor out({1});
    out[0] = log_z - sv[label];
    return t.make(std::move(out), {scores}, [scores, label, k, log_z](Node& n) {
        Tensor& gs = grad_of(scores);
        const double g = n.grad[0];
        for (std::size_t i = 0; i < k; ++i) {
            const double p = std::exp(scores->value[i] - log_z);
            gs[i] += g * (p - (i == label ? 1.0 : 0.0));
        }
    });
}

} // namespace dix::graph
