#include "codemix/neural/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "codemix/errors.hpp"

namespace codemix::nn {

namespace {

bool wants(const Node& self, std::size_t k) { return self.parents[k]->requires_grad; }
Tensor& grad_of(Node& self, std::size_t k) { return self.parents[k]->ensure_grad(); }
const Tensor& value_of(const Node& self, std::size_t k) { return self.parents[k]->value; }

Eigen::Map<const Eigen::RowVectorXd> row_vector(const Tensor& t) {
  return Eigen::Map<const Eigen::RowVectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
}

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw Error(ErrorKind::ShapeMismatch,
                std::string(what) + " expects a matrix, got " + shape_string(t.shape()));
  }
}

Var unary(const Var& a, double (*f)(double), double (*df_from_out)(double, double)) {
  Tensor out(a.shape());
  const auto& in = a.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result(std::move(out), {a}, [df_from_out](Node& self) {
    if (!wants(self, 0)) return;
    const Tensor& x = value_of(self, 0);
    Tensor& gx = grad_of(self, 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      gx[i] += self.grad[i] * df_from_out(x[i], self.value[i]);
    }
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out.matrix() += b.value().matrix();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (wants(self, k)) grad_of(self, k).matrix() += self.grad.matrix();
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  out.matrix().array() *= b.value().matrix().array();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (wants(self, 0)) {
      grad_of(self, 0).matrix().array() += self.grad.matrix().array() * value_of(self, 1).matrix().array();
    }
    if (wants(self, 1)) {
      grad_of(self, 1).matrix().array() += self.grad.matrix().array() * value_of(self, 0).matrix().array();
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  out.matrix() *= s;
  return make_result(std::move(out), {a}, [s](Node& self) {
    if (wants(self, 0)) grad_of(self, 0).matrix() += s * self.grad.matrix();
  });
}

Var mul_mask(const Var& a, const Tensor& mask) {
  require_same_shape(a.value(), mask, "mul_mask");
  Tensor out = a.value();
  out.matrix().array() *= mask.matrix().array();
  return make_result(std::move(out), {a}, [mask](Node& self) {
    if (wants(self, 0)) grad_of(self, 0).matrix().array() += self.grad.matrix().array() * mask.matrix().array();
  });
}

Var sigmoid(const Var& a) {
  return unary(a, sigm, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var matmul(const Var& a, const Var& b) {
  require_matrix(a.value(), "matmul");
  require_matrix(b.value(), "matmul");
  if (a.value().cols() != b.value().rows()) {
    throw Error(ErrorKind::ShapeMismatch, "matmul " + shape_string(a.shape()) + " @ " +
                                              shape_string(b.shape()));
  }
  Tensor out({a.value().rows(), b.value().cols()});
  out.matrix().noalias() = a.value().matrix() * b.value().matrix();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (wants(self, 0)) grad_of(self, 0).matrix().noalias() += self.grad.matrix() * value_of(self, 1).matrix().transpose();
    if (wants(self, 1)) grad_of(self, 1).matrix().noalias() += value_of(self, 0).matrix().transpose() * self.grad.matrix();
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_matrix(x.value(), "linear");
  require_matrix(weight.value(), "linear");
  if (x.value().cols() != weight.value().cols()) {
    throw Error(ErrorKind::ShapeMismatch, "linear input " + shape_string(x.shape()) +
                                              " vs weight " + shape_string(weight.shape()));
  }
  const std::size_t out_dim = weight.value().rows();
  if (bias.defined() && bias.value().size() != out_dim) {
    throw Error(ErrorKind::ShapeMismatch, "linear bias " + shape_string(bias.shape()));
  }
  Tensor out({x.value().rows(), out_dim});
  out.matrix().noalias() = x.value().matrix() * weight.value().matrix().transpose();
  if (bias.defined()) {
    out.matrix().rowwise() += row_vector(bias.value());
  }
  std::vector<Var> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_result(std::move(out), std::move(parents), [](Node& self) {
    if (wants(self, 0)) grad_of(self, 0).matrix().noalias() += self.grad.matrix() * value_of(self, 1).matrix();
    if (wants(self, 1)) grad_of(self, 1).matrix().noalias() += self.grad.matrix().transpose() * value_of(self, 0).matrix();
    if (self.parents.size() > 2 && wants(self, 2)) {
      Tensor& gb = grad_of(self, 2);
      MatrixMap(gb.data(), 1, static_cast<Eigen::Index>(gb.size())) += self.grad.matrix().colwise().sum();
    }
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
  require_matrix(a.value(), "slice_cols");
  if (begin + count > a.value().cols()) {
    throw Error(ErrorKind::ShapeMismatch, "slice_cols beyond " + shape_string(a.shape()));
  }
  const auto rows = static_cast<Eigen::Index>(a.value().rows());
  Tensor out({a.value().rows(), count});
  out.matrix() = a.value().matrix().block(0, static_cast<Eigen::Index>(begin), rows,
                                          static_cast<Eigen::Index>(count));
  return make_result(std::move(out), {a}, [begin, count, rows](Node& self) {
    if (!wants(self, 0)) return;
    grad_of(self, 0).matrix().block(0, static_cast<Eigen::Index>(begin), rows,
                                    static_cast<Eigen::Index>(count)) += self.grad.matrix();
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorKind::ShapeMismatch, "concat_cols of nothing");
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require_matrix(p.value(), "concat_cols");
    if (p.value().rows() != rows) throw Error(ErrorKind::ShapeMismatch, "concat_cols row mismatch");
    cols += p.value().cols();
  }
  Tensor out({rows, cols});
  std::vector<std::size_t> offsets;
  std::size_t c0 = 0;
  for (const auto& p : parts) {
    offsets.push_back(c0);
    out.matrix().block(0, static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(rows),
                       static_cast<Eigen::Index>(p.value().cols())) = p.value().matrix();
    c0 += p.value().cols();
  }
  return make_result(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                     [offsets, rows](Node& self) {
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         if (!wants(self, k)) continue;
                         Tensor& g = grad_of(self, k);
                         g.matrix() += self.grad.matrix().block(
                             0, static_cast<Eigen::Index>(offsets[k]), static_cast<Eigen::Index>(rows),
                             static_cast<Eigen::Index>(g.cols()));
                       }
                     });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorKind::ShapeMismatch, "concat_rows of nothing");
  const std::size_t cols = parts[0].value().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_matrix(p.value(), "concat_rows");
    if (p.value().cols() != cols) throw Error(ErrorKind::ShapeMismatch, "concat_rows column mismatch");
    rows += p.value().rows();
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(), out.data() + offset);
    offset += p.value().size();
  }
  return make_result(std::move(out), std::vector<Var>(parts.begin(), parts.end()), [](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      const std::size_t n = value_of(self, k).size();
      if (wants(self, k)) {
        Tensor& g = grad_of(self, k);
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
      }
      off += n;
    }
  });
}

Var embedding(const Var& table, std::span<const int> ids, const Tensor* row_scale) {
  require_matrix(table.value(), "embedding");
  const std::size_t vocab = table.value().rows();
  const std::size_t dim = table.value().cols();
  if (row_scale && row_scale->size() != vocab) {
    throw Error(ErrorKind::ShapeMismatch, "embedding row scale size mismatch");
  }
  Tensor out({ids.size(), dim});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const int id = ids[r];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw Error(ErrorKind::IdOutOfRange,
                  "token id " + std::to_string(id) + " outside vocab of " + std::to_string(vocab), id);
    }
    const double s = row_scale ? (*row_scale)[static_cast<std::size_t>(id)] : 1.0;
    const double* src = table.value().data() + static_cast<std::size_t>(id) * dim;
    for (std::size_t c = 0; c < dim; ++c) out.at(r, c) = src[c] * s;
  }
  std::vector<int> id_copy(ids.begin(), ids.end());
  Tensor scale_copy = row_scale ? *row_scale : Tensor();
  return make_result(std::move(out), {table}, [id_copy = std::move(id_copy), scale_copy = std::move(scale_copy), dim](Node& self) {
    if (!wants(self, 0)) return;
    Tensor& g = grad_of(self, 0);
    for (std::size_t r = 0; r < id_copy.size(); ++r) {
      const auto id = static_cast<std::size_t>(id_copy[r]);
      const double s = scale_copy.empty() ? 1.0 : scale_copy[id];
      if (s == 0.0) continue;
      double* dst = g.data() + id * dim;
      for (std::size_t c = 0; c < dim; ++c) dst[c] += self.grad.at(r, c) * s;
    }
  });
}

Tensor softmax(const Tensor& logits) {
  Tensor p = logits;
  const std::size_t n = p.rows();
  const std::size_t k = p.cols();
  for (std::size_t r = 0; r < n; ++r) {
    double* row = p.data() + r * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      row[c] = std::exp(row[c] - mx);
      z += row[c];
    }
    for (std::size_t c = 0; c < k; ++c) row[c] /= z;
  }
  return p;
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> targets) {
  require_matrix(logits.value(), "softmax_cross_entropy");
  const std::size_t n = logits.value().rows();
  const std::size_t k = logits.value().cols();
  if (targets.size() != n) {
    throw Error(ErrorKind::ShapeMismatch, "softmax_cross_entropy: " + std::to_string(targets.size()) +
                                              " targets for " + std::to_string(n) + " rows");
  }
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const int t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= k) {
      throw Error(ErrorKind::TargetOutOfRange, "target " + std::to_string(t) + " outside " +
                                                   std::to_string(k) + " classes", t);
    }
    const double* row = logits.value().data() + r * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(row[c] - mx);
    loss += (std::log(z) + mx) - row[t];
  }
  loss /= static_cast<double>(n);
  std::vector<int> tcopy(targets.begin(), targets.end());
  return make_result(Tensor::scalar(loss), {logits}, [tcopy = std::move(tcopy)](Node& self) {
    if (!wants(self, 0)) return;
    const Tensor p = softmax(value_of(self, 0));
    Tensor& g = grad_of(self, 0);
    const std::size_t rows = p.rows();
    const std::size_t cols = p.cols();
    const double up = self.grad[0] / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double onehot = (static_cast<int>(c) == tcopy[r]) ? 1.0 : 0.0;
        g.at(r, c) += up * (p.at(r, c) - onehot);
      }
    }
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return make_result(Tensor::scalar(s), {a}, [](Node& self) {
    if (!wants(self, 0)) return;
    Tensor& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
  });
}

std::pair<Var, Var> lstm_cell(const Var& x, const Var& h, const Var& c, const Var& w_ih,
                              const Var& w_hh, const Var& bias) {
  const std::size_t hidden = w_hh.value().cols();
  const std::size_t batch = x.value().rows();
  if (w_ih.value().rows() != 4 * hidden || w_hh.value().rows() != 4 * hidden ||
      bias.value().size() != 4 * hidden || h.value().rows() != batch ||
      h.value().cols() != hidden || c.value().rows() != batch || c.value().cols() != hidden ||
      x.value().cols() != w_ih.value().cols()) {
    throw Error(ErrorKind::ShapeMismatch,
                "lstm_cell: x " + shape_string(x.shape()) + ", h " + shape_string(h.shape()) +
                    ", c " + shape_string(c.shape()) + ", w_ih " + shape_string(w_ih.shape()) +
                    ", w_hh " + shape_string(w_hh.shape()));
  }

  // Pre-activations [batch x 4H] = x W_ih^T + h W_hh^T + b.
  Tensor pre({batch, 4 * hidden});
  pre.matrix().noalias() = x.value().matrix() * w_ih.value().matrix().transpose();
  pre.matrix().noalias() += h.value().matrix() * w_hh.value().matrix().transpose();
  pre.matrix().rowwise() += row_vector(bias.value());
  Var gates = make_result(std::move(pre), {x, h, w_ih, w_hh, bias}, [](Node& self) {
    const auto& g = self.grad.matrix();
    if (wants(self, 0)) grad_of(self, 0).matrix().noalias() += g * value_of(self, 2).matrix();
    if (wants(self, 1)) grad_of(self, 1).matrix().noalias() += g * value_of(self, 3).matrix();
    if (wants(self, 2)) grad_of(self, 2).matrix().noalias() += g.transpose() * value_of(self, 0).matrix();
    if (wants(self, 3)) grad_of(self, 3).matrix().noalias() += g.transpose() * value_of(self, 1).matrix();
    if (wants(self, 4)) {
      Tensor& gb = grad_of(self, 4);
      MatrixMap(gb.data(), 1, static_cast<Eigen::Index>(gb.size())) += g.colwise().sum();
    }
  });

  // c' = sigma(f) * c + sigma(i) * tanh(g)
  Tensor c_new({batch, hidden});
  {
    const Tensor& p = gates.value();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < hidden; ++j) {
        const double* row = p.data() + b * 4 * hidden;
        c_new.at(b, j) = sigm(row[hidden + j]) * c.value().at(b, j) +
                         sigm(row[j]) * std::tanh(row[2 * hidden + j]);
      }
    }
  }
  Var c_out = make_result(std::move(c_new), {gates, c}, [hidden](Node& self) {
    const Tensor& p = value_of(self, 0);
    const Tensor& c_prev = value_of(self, 1);
    const std::size_t batch = c_prev.rows();
    Tensor* gp = wants(self, 0) ? &grad_of(self, 0) : nullptr;
    Tensor* gc = wants(self, 1) ? &grad_of(self, 1) : nullptr;
    for (std::size_t b = 0; b < batch; ++b) {
      const double* row = p.data() + b * 4 * hidden;
      for (std::size_t j = 0; j < hidden; ++j) {
        const double dc = self.grad.at(b, j);
        const double si = sigm(row[j]);
        const double sf = sigm(row[hidden + j]);
        const double tg = std::tanh(row[2 * hidden + j]);
        if (gp) {
          double* grow = gp->data() + b * 4 * hidden;
          grow[j] += dc * tg * si * (1.0 - si);
          grow[hidden + j] += dc * c_prev.at(b, j) * sf * (1.0 - sf);
          grow[2 * hidden + j] += dc * si * (1.0 - tg * tg);
        }
        if (gc) gc->at(b, j) += dc * sf;
      }
    }
  });

  // h' = sigma(o) * tanh(c')
  Tensor h_new({batch, hidden});
  {
    const Tensor& p = gates.value();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < hidden; ++j) {
        h_new.at(b, j) = sigm(p.data()[b * 4 * hidden + 3 * hidden + j]) * std::tanh(c_out.value().at(b, j));
      }
    }
  }
  Var h_out = make_result(std::move(h_new), {gates, c_out}, [hidden](Node& self) {
    const Tensor& p = value_of(self, 0);
    const Tensor& cn = value_of(self, 1);
    const std::size_t batch = cn.rows();
    Tensor* gp = wants(self, 0) ? &grad_of(self, 0) : nullptr;
    Tensor* gc = wants(self, 1) ? &grad_of(self, 1) : nullptr;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < hidden; ++j) {
        const double dh = self.grad.at(b, j);
        const double so = sigm(p.data()[b * 4 * hidden + 3 * hidden + j]);
        const double tc = std::tanh(cn.at(b, j));
        if (gp) gp->data()[b * 4 * hidden + 3 * hidden + j] += dh * tc * so * (1.0 - so);
        if (gc) gc->at(b, j) += dh * so * (1.0 - tc * tc);
      }
    }
  });
  return {h_out, c_out};
}

namespace {

void check_pool_inputs(std::span<const Var> steps, std::span<const std::size_t> lengths) {
  if (steps.empty()) throw Error(ErrorKind::ShapeMismatch, "pooling over zero steps");
  const std::size_t batch = steps[0].value().rows();
  if (lengths.size() != batch) throw Error(ErrorKind::ShapeMismatch, "pooling lengths vs batch");
  for (auto len : lengths) {
    if (len == 0 || len > steps.size()) {
      throw Error(ErrorKind::ShapeMismatch, "pooling length " + std::to_string(len) + " outside [1," +
                                                std::to_string(steps.size()) + "]");
    }
  }
}

}  // namespace

Var masked_max_pool(std::span<const Var> steps, std::span<const std::size_t> lengths) {
  check_pool_inputs(steps, lengths);
  const std::size_t batch = steps[0].value().rows();
  const std::size_t dim = steps[0].value().cols();
  Tensor out({batch, dim});
  std::vector<std::size_t> arg(batch * dim, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t d = 0; d < dim; ++d) {
      double best = steps[0].value().at(b, d);
      std::size_t best_t = 0;
      for (std::size_t t = 1; t < lengths[b]; ++t) {
        const double v = steps[t].value().at(b, d);
        if (v > best) {
          best = v;
          best_t = t;
        }
      }
      out.at(b, d) = best;
      arg[b * dim + d] = best_t;
    }
  }
  return make_result(std::move(out), std::vector<Var>(steps.begin(), steps.end()),
                     [arg = std::move(arg), batch, dim](Node& self) {
                       for (std::size_t b = 0; b < batch; ++b) {
                         for (std::size_t d = 0; d < dim; ++d) {
                           const std::size_t t = arg[b * dim + d];
                           if (wants(self, t)) grad_of(self, t).at(b, d) += self.grad.at(b, d);
                         }
                       }
                     });
}

Var masked_mean_pool(std::span<const Var> steps, std::span<const std::size_t> lengths) {
  check_pool_inputs(steps, lengths);
  const std::size_t batch = steps[0].value().rows();
  const std::size_t dim = steps[0].value().cols();
  Tensor out({batch, dim});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t d = 0; d < dim; ++d) {
      double s = 0.0;
      for (std::size_t t = 0; t < lengths[b]; ++t) s += steps[t].value().at(b, d);
      out.at(b, d) = s / static_cast<double>(lengths[b]);
    }
  }
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  return make_result(std::move(out), std::vector<Var>(steps.begin(), steps.end()),
                     [lens = std::move(lens), batch, dim](Node& self) {
                       for (std::size_t t = 0; t < self.parents.size(); ++t) {
                         if (!wants(self, t)) continue;
                         Tensor& g = grad_of(self, t);
                         for (std::size_t b = 0; b < batch; ++b) {
                           if (t >= lens[b]) continue;
                           const double inv = 1.0 / static_cast<double>(lens[b]);
                           for (std::size_t d = 0; d < dim; ++d) g.at(b, d) += self.grad.at(b, d) * inv;
                         }
                       }
                     });
}

Var gather_last(std::span<const Var> steps, std::span<const std::size_t> lengths) {
  check_pool_inputs(steps, lengths);
  const std::size_t batch = steps[0].value().rows();
  const std::size_t dim = steps[0].value().cols();
  Tensor out({batch, dim});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t d = 0; d < dim; ++d) out.at(b, d) = steps[lengths[b] - 1].value().at(b, d);
  }
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  return make_result(std::move(out), std::vector<Var>(steps.begin(), steps.end()),
                     [lens = std::move(lens), batch, dim](Node& self) {
                       for (std::size_t b = 0; b < batch; ++b) {
                         const std::size_t t = lens[b] - 1;
                         if (!wants(self, t)) continue;
                         Tensor& g = grad_of(self, t);
                         for (std::size_t d = 0; d < dim; ++d) g.at(b, d) += self.grad.at(b, d);
                       }
                     });
}

}  // namespace codemix::nn
