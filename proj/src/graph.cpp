#include "anticipate/graph.hpp"

#include <algorithm>
#include <cmath>

namespace anticipate {

namespace {

void check(bool ok, const char* msg) {
  if (!ok) throw DimensionError(msg);
}

}  // namespace

void Graph::backward(Ref loss) {
  check(value(loss).size() == 1, "backward: loss must be scalar");
  for (auto& n : nodes_) n.grad.clear();
  gbuf(loss)[0] = 1.0;
  for (Ref i = loss; i >= 0; --i) {
    Node& n = node(i);
    if (n.requires_grad && !n.grad.empty() && n.back) n.back(*this);
  }
}

Graph::Ref Graph::add(Ref a, Ref b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check(va.shape == vb.shape, "add: shape mismatch");
  Tensor out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += vb.data[i];
  Ref o = make(std::move(out), rg(a) || rg(b), {});
  node(o).back = [o, a, b](Graph& g) {
    const auto& go = g.node(o).grad;
    if (g.rg(a)) {
      auto& ga = g.gbuf(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (g.rg(b)) {
      auto& gb = g.gbuf(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
    }
  };
  return o;
}

Graph::Ref Graph::sub(Ref a, Ref b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check(va.shape == vb.shape, "sub: shape mismatch");
  Tensor out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= vb.data[i];
  Ref o = make(std::move(out), rg(a) || rg(b), {});
  node(o).back = [o, a, b](Graph& g) {
    const auto& go = g.node(o).grad;
    if (g.rg(a)) {
      auto& ga = g.gbuf(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (g.rg(b)) {
      auto& gb = g.gbuf(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
    }
  };
  return o;
}

Graph::Ref Graph::mul(Ref a, Ref b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check(va.shape == vb.shape, "mul: shape mismatch");
  Tensor out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= vb.data[i];
  Ref o = make(std::move(out), rg(a) || rg(b), {});
  node(o).back = [o, a, b](Graph& g) {
    const auto& go = g.node(o).grad;
    const auto& va = g.value(a).data;
    const auto& vb = g.value(b).data;
    if (g.rg(a)) {
      auto& ga = g.gbuf(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * vb[i];
    }
    if (g.rg(b)) {
      auto& gb = g.gbuf(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * va[i];
    }
  };
  return o;
}

Graph::Ref Graph::scale(Ref a, double s) {
  Tensor out = value(a);
  for (double& v : out.data) v *= s;
  Ref o = make(std::move(out), rg(a), {});
  node(o).back = [o, a, s](Graph& g) {
    if (!g.rg(a)) return;
    const auto& go = g.node(o).grad;
    auto& ga = g.gbuf(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * s;
  };
  return o;
}

Graph::Ref Graph::sigmoid(Ref a) {
  Tensor out = value(a);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  Ref o = make(std::move(out), rg(a), {});
  node(o).back = [o, a](Graph& g) {
    if (!g.rg(a)) return;
    const auto& go = g.node(o).grad;
    const auto& y = g.value(o).data;
    auto& ga = g.gbuf(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * y[i] * (1.0 - y[i]);
  };
  return o;
}

Graph::Ref Graph::tanh_op(Ref a) {
  Tensor out = value(a);
  for (double& v : out.data) v = std::tanh(v);
  Ref o = make(std::move(out), rg(a), {});
  node(o).back = [o, a](Graph& g) {
    if (!g.rg(a)) return;
    const auto& go = g.node(o).grad;
    const auto& y = g.value(o).data;
    auto& ga = g.gbuf(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * (1.0 - y[i] * y[i]);
  };
  return o;
}

Graph::Ref Graph::relu(Ref a) {
  Tensor out = value(a);
  for (double& v : out.data) v = std::max(v, 0.0);
  Ref o = make(std::move(out), rg(a), {});
  node(o).back = [o, a](Graph& g) {
    if (!g.rg(a)) return;
    const auto& go = g.node(o).grad;
    const auto& x = g.value(a).data;
    auto& ga = g.gbuf(a);
    for (std::size_t i = 0; i < go.size(); ++i)
      if (x[i] > 0.0) ga[i] += go[i];
  };
  return o;
}

Graph::Ref Graph::concat(const std::vector<Ref>& parts) {
  check(!parts.empty(), "concat: empty");
  std::vector<double> data;
  bool needs = false;
  for (Ref p : parts) {
    const Tensor& v = value(p);
    check(v.rank() == 1, "concat: 1-D parts expected");
    data.insert(data.end(), v.data.begin(), v.data.end());
    needs = needs || rg(p);
  }
  Ref o = make(Tensor::vec(std::move(data)), needs, {});
  std::vector<Ref> ps = parts;
  node(o).back = [o, ps](Graph& g) {
    const auto& go = g.node(o).grad;
    std::size_t off = 0;
    for (Ref p : ps) {
      std::size_t n = g.value(p).size();
      if (g.rg(p)) {
        auto& gp = g.gbuf(p);
        for (std::size_t i = 0; i < n; ++i) gp[i] += go[off + i];
      }
      off += n;
    }
  };
  return o;
}

Graph::Ref Graph::concat_cols(const std::vector<Ref>& cols) {
  check(!cols.empty(), "concat_cols: empty");
  std::size_t m = value(cols[0]).size();
  std::size_t t = cols.size();
  Tensor out = Tensor::zeros({m, t});
  bool needs = false;
  for (std::size_t j = 0; j < t; ++j) {
    const Tensor& v = value(cols[j]);
    check(v.size() == m, "concat_cols: column size mismatch");
    for (std::size_t i = 0; i < m; ++i) out.data[i * t + j] = v.data[i];
    needs = needs || rg(cols[j]);
  }
  Ref o = make(std::move(out), needs, {});
  std::vector<Ref> cs = cols;
  node(o).back = [o, cs, m, t](Graph& g) {
    const auto& go = g.node(o).grad;
    for (std::size_t j = 0; j < t; ++j) {
      if (!g.rg(cs[j])) continue;
      auto& gc = g.gbuf(cs[j]);
      for (std::size_t i = 0; i < m; ++i) gc[i] += go[i * t + j];
    }
  };
  return o;
}

Graph::Ref Graph::col(Ref mref, std::size_t j) {
  const Tensor& v = value(mref);
  check(v.rank() == 2 && j < v.cols(), "col: bad index");
  std::size_t m = v.rows(), t = v.cols();
  std::vector<double> data(m);
  for (std::size_t i = 0; i < m; ++i) data[i] = v.data[i * t + j];
  Ref o = make(Tensor::vec(std::move(data)), rg(mref), {});
  node(o).back = [o, mref, j, m, t](Graph& g) {
    if (!g.rg(mref)) return;
    const auto& go = g.node(o).grad;
    auto& gm = g.gbuf(mref);
    for (std::size_t i = 0; i < m; ++i) gm[i * t + j] += go[i];
  };
  return o;
}

Graph::Ref Graph::matvec(Ref w, Ref x) {
  const Tensor& vw = value(w);
  const Tensor& vx = value(x);
  check(vw.rank() == 2 && vx.rank() == 1 && vw.cols() == vx.size(),
        "matvec: shape mismatch");
  std::size_t m = vw.rows(), n = vw.cols();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = &vw.data[i * n];
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += row[j] * vx.data[j];
    out[i] = s;
  }
  Ref o = make(Tensor::vec(std::move(out)), rg(w) || rg(x), {});
  node(o).back = [o, w, x, m, n](Graph& g) {
    const auto& go = g.node(o).grad;
    const auto& vw = g.value(w).data;
    const auto& vx = g.value(x).data;
    if (g.rg(w)) {
      auto& gw = g.gbuf(w);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gw[i * n + j] += go[i] * vx[j];
    }
    if (g.rg(x)) {
      auto& gx = g.gbuf(x);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gx[j] += go[i] * vw[i * n + j];
    }
  };
  return o;
}

Graph::Ref Graph::matmul(Ref a, Ref b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check(va.rank() == 2 && vb.rank() == 2 && va.cols() == vb.rows(),
        "matmul: shape mismatch");
  std::size_t m = va.rows(), k = va.cols(), n = vb.cols();
  Tensor out = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double av = va.data[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &vb.data[p * n];
      double* orow = &out.data[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  Ref o = make(std::move(out), rg(a) || rg(b), {});
  node(o).back = [o, a, b, m, k, n](Graph& g) {
    const auto& go = g.node(o).grad;
    const auto& va = g.value(a).data;
    const auto& vb = g.value(b).data;
    if (g.rg(a)) {
      auto& ga = g.gbuf(a);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += go[i * n + j] * vb[p * n + j];
          ga[i * k + p] += s;
        }
    }
    if (g.rg(b)) {
      auto& gb = g.gbuf(b);
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t i = 0; i < m; ++i) s += va[i * k + p] * go[i * n + j];
          gb[p * n + j] += s;
        }
    }
  };
  return o;
}

Graph::Ref Graph::vecmat(Ref x, Ref a) {
  const Tensor& vx = value(x);
  const Tensor& va = value(a);
  check(vx.rank() == 1 && va.rank() == 2 && vx.size() == va.rows(),
        "vecmat: shape mismatch");
  std::size_t m = va.rows(), n = va.cols();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double xv = vx.data[i];
    const double* row = &va.data[i * n];
    for (std::size_t j = 0; j < n; ++j) out[j] += xv * row[j];
  }
  Ref o = make(Tensor::vec(std::move(out)), rg(x) || rg(a), {});
  node(o).back = [o, x, a, m, n](Graph& g) {
    const auto& go = g.node(o).grad;
    const auto& vx = g.value(x).data;
    const auto& va = g.value(a).data;
    if (g.rg(x)) {
      auto& gx = g.gbuf(x);
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += go[j] * va[i * n + j];
        gx[i] += s;
      }
    }
    if (g.rg(a)) {
      auto& ga = g.gbuf(a);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += vx[i] * go[j];
    }
  };
  return o;
}

Graph::Ref Graph::add_bias_cols(Ref mref, Ref b) {
  const Tensor& vm = value(mref);
  const Tensor& vb = value(b);
  check(vm.rank() == 2 && vb.rank() == 1 && vm.rows() == vb.size(),
        "add_bias_cols: shape mismatch");
  std::size_t m = vm.rows(), t = vm.cols();
  Tensor out = vm;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < t; ++j) out.data[i * t + j] += vb.data[i];
  Ref o = make(std::move(out), rg(mref) || rg(b), {});
  node(o).back = [o, mref, b, m, t](Graph& g) {
    const auto& go = g.node(o).grad;
    if (g.rg(mref)) {
      auto& gm = g.gbuf(mref);
      for (std::size_t i = 0; i < go.size(); ++i) gm[i] += go[i];
    }
    if (g.rg(b)) {
      auto& gb = g.gbuf(b);
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < t; ++j) s += go[i * t + j];
        gb[i] += s;
      }
    }
  };
  return o;
}

namespace {
constexpr double kNormFloor = 1e-8;

// y = x / max(|x|, floor); writes y and returns the norm actually used.
double l2_normalize(const double* x, double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  double norm = std::sqrt(s);
  double d = std::max(norm, kNormFloor);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] / d;
  return norm;
}

// dx from dy for y = x/d where d = max(norm, floor).
void l2_normalize_back(const double* y, const double* gy, double norm, double* gx,
                       std::size_t n) {
  if (norm > kNormFloor) {
    double dotv = 0.0;
    for (std::size_t i = 0; i < n; ++i) dotv += gy[i] * y[i];
    for (std::size_t i = 0; i < n; ++i) gx[i] += (gy[i] - y[i] * dotv) / norm;
  } else {
    for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] / kNormFloor;
  }
}
}  // namespace

Graph::Ref Graph::normalize_l2(Ref v) {
  const Tensor& x = value(v);
  check(x.rank() == 1, "normalize_l2: vector expected");
  std::size_t n = x.size();
  Tensor out = Tensor::zeros({n});
  double norm = l2_normalize(x.data.data(), out.data.data(), n);
  Ref o = make(std::move(out), rg(v), {});
  node(o).back = [o, v, norm, n](Graph& g) {
    if (!g.rg(v)) return;
    const auto& go = g.node(o).grad;
    const auto& y = g.value(o).data;
    auto& gx = g.gbuf(v);
    l2_normalize_back(y.data(), go.data(), norm, gx.data(), n);
  };
  return o;
}

Graph::Ref Graph::normalize_cols(Ref mref) {
  const Tensor& x = value(mref);
  check(x.rank() == 2, "normalize_cols: matrix expected");
  std::size_t m = x.rows(), t = x.cols();
  Tensor out = Tensor::zeros({m, t});
  std::vector<double> norms(t);
  std::vector<double> colbuf(m), ybuf(m);
  for (std::size_t j = 0; j < t; ++j) {
    for (std::size_t i = 0; i < m; ++i) colbuf[i] = x.data[i * t + j];
    norms[j] = l2_normalize(colbuf.data(), ybuf.data(), m);
    for (std::size_t i = 0; i < m; ++i) out.data[i * t + j] = ybuf[i];
  }
  Ref o = make(std::move(out), rg(mref), {});
  node(o).back = [o, mref, norms, m, t](Graph& g) {
    if (!g.rg(mref)) return;
    const auto& go = g.node(o).grad;
    const auto& y = g.value(o).data;
    auto& gx = g.gbuf(mref);
    std::vector<double> ycol(m), gcol(m), gxcol(m);
    for (std::size_t j = 0; j < t; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        ycol[i] = y[i * t + j];
        gcol[i] = go[i * t + j];
        gxcol[i] = 0.0;
      }
      l2_normalize_back(ycol.data(), gcol.data(), norms[j], gxcol.data(), m);
      for (std::size_t i = 0; i < m; ++i) gx[i * t + j] += gxcol[i];
    }
  };
  return o;
}

Graph::Ref Graph::sum(Ref v) {
  const Tensor& x = value(v);
  double s = 0.0;
  for (double e : x.data) s += e;
  Ref o = make(Tensor::scalar(s), rg(v), {});
  node(o).back = [o, v](Graph& g) {
    if (!g.rg(v)) return;
    double go = g.node(o).grad[0];
    auto& gx = g.gbuf(v);
    for (double& e : gx) e += go;
  };
  return o;
}

Graph::Ref Graph::mean(Ref v) {
  std::size_t n = value(v).size();
  return scale(sum(v), 1.0 / static_cast<double>(n));
}

Graph::Ref Graph::dot(Ref a, Ref b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check(va.size() == vb.size(), "dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) s += va.data[i] * vb.data[i];
  Ref o = make(Tensor::scalar(s), rg(a) || rg(b), {});
  node(o).back = [o, a, b](Graph& g) {
    double go = g.node(o).grad[0];
    const auto& va = g.value(a).data;
    const auto& vb = g.value(b).data;
    if (g.rg(a)) {
      auto& ga = g.gbuf(a);
      for (std::size_t i = 0; i < va.size(); ++i) ga[i] += go * vb[i];
    }
    if (g.rg(b)) {
      auto& gb = g.gbuf(b);
      for (std::size_t i = 0; i < vb.size(); ++i) gb[i] += go * va[i];
    }
  };
  return o;
}

Graph::Ref Graph::softmax_op(Ref logits) {
  const Tensor& x = value(logits);
  check(x.rank() == 1, "softmax: vector expected");
  Tensor out = Tensor::vec(softmax(x.data));
  Ref o = make(std::move(out), rg(logits), {});
  node(o).back = [o, logits](Graph& g) {
    if (!g.rg(logits)) return;
    const auto& go = g.node(o).grad;
    const auto& s = g.value(o).data;
    auto& gx = g.gbuf(logits);
    double dotv = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) dotv += go[i] * s[i];
    for (std::size_t i = 0; i < s.size(); ++i) gx[i] += s[i] * (go[i] - dotv);
  };
  return o;
}

Graph::Ref Graph::softmax_cols(Ref logits) {
  const Tensor& x = value(logits);
  check(x.rank() == 2, "softmax_cols: matrix expected");
  std::size_t m = x.rows(), t = x.cols();
  Tensor out = Tensor::zeros({m, t});
  std::vector<double> colbuf(m);
  for (std::size_t j = 0; j < t; ++j) {
    for (std::size_t i = 0; i < m; ++i) colbuf[i] = x.data[i * t + j];
    auto s = softmax(colbuf);
    for (std::size_t i = 0; i < m; ++i) out.data[i * t + j] = s[i];
  }
  Ref o = make(std::move(out), rg(logits), {});
  node(o).back = [o, logits, m, t](Graph& g) {
    if (!g.rg(logits)) return;
    const auto& go = g.node(o).grad;
    const auto& s = g.value(o).data;
    auto& gx = g.gbuf(logits);
    for (std::size_t j = 0; j < t; ++j) {
      double dotv = 0.0;
      for (std::size_t i = 0; i < m; ++i) dotv += go[i * t + j] * s[i * t + j];
      for (std::size_t i = 0; i < m; ++i)
        gx[i * t + j] += s[i * t + j] * (go[i * t + j] - dotv);
    }
  };
  return o;
}

Graph::Ref Graph::nll_softmax(Ref logits, int target) {
  const Tensor& x = value(logits);
  check(x.rank() == 1, "nll_softmax: vector expected");
  if (target < 0 || static_cast<std::size_t>(target) >= x.size())
    throw InputError("nll_softmax: target out of range");
  auto probs = softmax(x.data);
  double loss = -std::log(std::max(probs[static_cast<std::size_t>(target)], kProbFloor));
  Ref o = make(Tensor::scalar(loss), rg(logits), {});
  node(o).back = [o, logits, target, probs](Graph& g) {
    if (!g.rg(logits)) return;
    double go = g.node(o).grad[0];
    auto& gx = g.gbuf(logits);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      double d = probs[i] - (static_cast<int>(i) == target ? 1.0 : 0.0);
      gx[i] += go * d;
    }
  };
  return o;
}

Graph::Ref Graph::mse_loss(Ref pred, Ref target) {
  const Tensor& vp = value(pred);
  const Tensor& vt = value(target);
  check(vp.size() == vt.size() && vp.size() > 0, "mse: size mismatch");
  std::size_t n = vp.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = vp.data[i] - vt.data[i];
    s += d * d;
  }
  Ref o = make(Tensor::scalar(s / static_cast<double>(n)), rg(pred) || rg(target), {});
  node(o).back = [o, pred, target, n](Graph& g) {
    double go = g.node(o).grad[0] * 2.0 / static_cast<double>(n);
    const auto& vp = g.value(pred).data;
    const auto& vt = g.value(target).data;
    if (g.rg(pred)) {
      auto& gp = g.gbuf(pred);
      for (std::size_t i = 0; i < n; ++i) gp[i] += go * (vp[i] - vt[i]);
    }
    if (g.rg(target)) {
      auto& gt = g.gbuf(target);
      for (std::size_t i = 0; i < n; ++i) gt[i] -= go * (vp[i] - vt[i]);
    }
  };
  return o;
}

Graph::Ref Graph::gru_cell(Ref x, Ref h_prev, const GruRefs& w) {
  const Tensor& vx = value(x);
  const Tensor& vh = value(h_prev);
  const Tensor& wz = value(w.Wz);
  check(vx.rank() == 1 && vh.rank() == 1, "gru_cell: vector inputs expected");
  check(wz.rank() == 2 && wz.cols() == vx.size() && wz.rows() == vh.size(),
        "gru_cell: input dim mismatch");
  std::size_t H = vh.size(), I = vx.size();
  auto affine = [&](Ref W, Ref U, Ref b, const std::vector<double>& uin) {
    const auto& vw = value(W).data;
    const auto& vu = value(U).data;
    const auto& vb = value(b).data;
    std::vector<double> out(H);
    for (std::size_t i = 0; i < H; ++i) {
      double s = vb[i];
      const double* wr = &vw[i * I];
      for (std::size_t j = 0; j < I; ++j) s += wr[j] * vx.data[j];
      const double* ur = &vu[i * H];
      for (std::size_t j = 0; j < H; ++j) s += ur[j] * uin[j];
      out[i] = s;
    }
    return out;
  };
  std::vector<double> z = affine(w.Wz, w.Uz, w.bz, vh.data);
  std::vector<double> r = affine(w.Wr, w.Ur, w.br, vh.data);
  for (auto& v : z) v = 1.0 / (1.0 + std::exp(-v));
  for (auto& v : r) v = 1.0 / (1.0 + std::exp(-v));
  std::vector<double> rh(H);
  for (std::size_t i = 0; i < H; ++i) rh[i] = r[i] * vh.data[i];
  std::vector<double> c = affine(w.Wh, w.Uh, w.bh, rh);
  for (auto& v : c) v = std::tanh(v);
  std::vector<double> hn(H);
  for (std::size_t i = 0; i < H; ++i)
    hn[i] = (1.0 - z[i]) * vh.data[i] + z[i] * c[i];

  bool needs = rg(x) || rg(h_prev) || rg(w.Wz) || rg(w.Uz) || rg(w.bz) ||
               rg(w.Wr) || rg(w.Ur) || rg(w.br) || rg(w.Wh) || rg(w.Uh) || rg(w.bh);
  Ref o = make(Tensor::vec(hn), needs, {});
  GruRefs wr = w;
  node(o).back = [o, x, h_prev, wr, z, r, c, rh, H, I](Graph& g) {
    const auto& go = g.node(o).grad;
    const auto& vx = g.value(x).data;
    const auto& vh = g.value(h_prev).data;
    std::vector<double> dz(H), dc(H), dh(H, 0.0);
    for (std::size_t i = 0; i < H; ++i) {
      dz[i] = go[i] * (c[i] - vh[i]);
      dc[i] = go[i] * z[i];
      dh[i] = go[i] * (1.0 - z[i]);
    }
    std::vector<double> da_h(H), da_z(H), da_r(H);
    for (std::size_t i = 0; i < H; ++i) da_h[i] = dc[i] * (1.0 - c[i] * c[i]);
    // through candidate: Wh x + Uh (r o h) + bh
    std::vector<double> drh(H, 0.0), dx(I, 0.0);
    const auto& vUh = g.value(wr.Uh).data;
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < H; ++j) drh[j] += vUh[i * H + j] * da_h[i];
    std::vector<double> dr(H);
    for (std::size_t i = 0; i < H; ++i) {
      dr[i] = drh[i] * vh[i];
      dh[i] += drh[i] * r[i];
      da_r[i] = dr[i] * r[i] * (1.0 - r[i]);
      da_z[i] = dz[i] * z[i] * (1.0 - z[i]);
    }
    auto accum_gate = [&](Ref W, Ref U, Ref b, const std::vector<double>& da,
                          const std::vector<double>& uin, bool u_is_h) {
      if (g.rg(W)) {
        auto& gw = g.gbuf(W);
        for (std::size_t i = 0; i < H; ++i)
          for (std::size_t j = 0; j < I; ++j) gw[i * I + j] += da[i] * vx[j];
      }
      if (g.rg(U)) {
        auto& gu = g.gbuf(U);
        for (std::size_t i = 0; i < H; ++i)
          for (std::size_t j = 0; j < H; ++j) gu[i * H + j] += da[i] * uin[j];
      }
      if (g.rg(b)) {
        auto& gb = g.gbuf(b);
        for (std::size_t i = 0; i < H; ++i) gb[i] += da[i];
      }
      if (g.rg(x)) {
        const auto& vw = g.value(W).data;
        for (std::size_t i = 0; i < H; ++i)
          for (std::size_t j = 0; j < I; ++j) dx[j] += vw[i * I + j] * da[i];
      }
      if (u_is_h && g.rg(h_prev)) {
        const auto& vu = g.value(U).data;
        for (std::size_t i = 0; i < H; ++i)
          for (std::size_t j = 0; j < H; ++j) dh[j] += vu[i * H + j] * da[i];
      }
    };
    accum_gate(wr.Wh, wr.Uh, wr.bh, da_h, rh, false);
    accum_gate(wr.Wz, wr.Uz, wr.bz, da_z, vh, true);
    accum_gate(wr.Wr, wr.Ur, wr.br, da_r, vh, true);
    if (g.rg(h_prev)) {
      auto& gh = g.gbuf(h_prev);
      for (std::size_t i = 0; i < H; ++i) gh[i] += dh[i];
    }
    if (g.rg(x)) {
      auto& gx = g.gbuf(x);
      for (std::size_t j = 0; j < I; ++j) gx[j] += dx[j];
    }
  };
  return o;
}

Graph::Ref Graph::dilated_conv1d(Ref input, Ref w, Ref b, int dilation) {
  const Tensor& vi = value(input);
  const Tensor& vw = value(w);
  const Tensor& vb = value(b);
  if (dilation < 1) throw InputError("dilated_conv1d: dilation >= 1 required");
  check(vi.rank() == 2 && vw.rank() == 3 && vw.shape[0] == 3,
        "dilated_conv1d: bad shapes");
  std::size_t cin = vi.rows(), T = vi.cols();
  std::size_t cout = vw.shape[1];
  check(vw.shape[2] == cin && vb.size() == cout, "dilated_conv1d: channel mismatch");
  std::size_t d = static_cast<std::size_t>(dilation);
  Tensor out = Tensor::zeros({cout, T});
  // output[k,t] = b[k] + sum_{j in {-1,0,1}} sum_c w[j+1,k,c] * in[c, t+j*d]
  for (std::size_t k = 0; k < cout; ++k) {
    double* orow = &out.data[k * T];
    for (std::size_t t = 0; t < T; ++t) orow[t] = vb.data[k];
    for (int j = -1; j <= 1; ++j) {
      const double* wtap = &vw.data[(static_cast<std::size_t>(j + 1) * cout + k) * cin];
      for (std::size_t c = 0; c < cin; ++c) {
        double wv = wtap[c];
        if (wv == 0.0) continue;
        const double* irow = &vi.data[c * T];
        std::size_t t0 = (j < 0) ? d : 0;
        std::size_t t1 = (j > 0) ? (T > d ? T - d : 0) : T;
        for (std::size_t t = t0; t < t1; ++t)
          orow[t] += wv * irow[t + static_cast<std::size_t>(j) * d];
      }
    }
  }
  Ref o = make(std::move(out), rg(input) || rg(w) || rg(b), {});
  node(o).back = [o, input, w, b, d, cin, cout, T](Graph& g) {
    const auto& go = g.node(o).grad;
    const auto& vi = g.value(input).data;
    const auto& vw = g.value(w).data;
    if (g.rg(b)) {
      auto& gb = g.gbuf(b);
      for (std::size_t k = 0; k < cout; ++k) {
        double s = 0.0;
        for (std::size_t t = 0; t < T; ++t) s += go[k * T + t];
        gb[k] += s;
      }
    }
    for (int j = -1; j <= 1; ++j) {
      std::size_t t0 = (j < 0) ? d : 0;
      std::size_t t1 = (j > 0) ? (T > d ? T - d : 0) : T;
      for (std::size_t k = 0; k < cout; ++k) {
        const double* grow = &go[k * T];
        for (std::size_t c = 0; c < cin; ++c) {
          std::size_t widx = (static_cast<std::size_t>(j + 1) * cout + k) * cin + c;
          if (g.rg(w)) {
            double s = 0.0;
            const double* irow = &vi[c * T];
            for (std::size_t t = t0; t < t1; ++t)
              s += grow[t] * irow[t + static_cast<std::size_t>(j) * d];
            g.gbuf(w)[widx] += s;
          }
          if (g.rg(input)) {
            double wv = vw[widx];
            if (wv == 0.0) continue;
            auto& gi = g.gbuf(input);
            double* girow = &gi[c * T];
            for (std::size_t t = t0; t < t1; ++t)
              girow[t + static_cast<std::size_t>(j) * d] += wv * grow[t];
          }
        }
      }
    }
  };
  return o;
}

Graph::Ref Graph::conv1x1(Ref input, Ref w, Ref b) {
  return add_bias_cols(matmul(w, input), b);
}

}  // namespace anticipate
