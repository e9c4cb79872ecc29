#include "negcnn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "negcnn/errors.hpp"
#include "negcnn/exec_mode.hpp"

namespace negcnn::ops {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a) + " vs " +
                         shape_to_string(b));
  }
}

template <typename T>
void require_same_tape(const Var<T>& a, const Var<T>& b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw ContractError("operands belong to different tapes");
  }
}

template <typename T, typename F>
BasicTensor<T> map_binary(const BasicTensor<T>& a, const BasicTensor<T>& b, F f) {
  BasicTensor<T> out(a.shape());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(x[i], y[i]);
  return out;
}

}  // namespace

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require_same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_to_string(av.shape()) + " and " +
                         shape_to_string(bv.shape()));
  }
  const auto m = static_cast<Eigen::Index>(av.dim(0));
  const auto k = static_cast<Eigen::Index>(av.dim(1));
  const auto n = static_cast<Eigen::Index>(bv.dim(1));
  BasicTensor<T> out({av.dim(0), bv.dim(1)});
  MapR<T>(out.data().data(), m, n).noalias() =
      CMapR<T>(av.data().data(), m, k) * CMapR<T>(bv.data().data(), k, n);

  return a.tape().record(std::move(out), {a, b},
                         [a, b, m, k, n](const BasicTensor<T>& up, Tape<T>& tape) {
                           CMapR<T> dc(up.data().data(), m, n);
                           if (a.tracked()) {
                             BasicTensor<T> da(a.shape());
                             MapR<T>(da.data().data(), m, k).noalias() =
                                 dc * CMapR<T>(b.value().data().data(), k, n).transpose();
                             tape.accumulate(a, std::move(da));
                           }
                           if (b.tracked()) {
                             BasicTensor<T> db(b.shape());
                             MapR<T>(db.data().data(), k, n).noalias() =
                                 CMapR<T>(a.value().data().data(), m, k).transpose() * dc;
                             tape.accumulate(b, std::move(db));
                           }
                         });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_tape(a, b);
  require_same_shape(a.shape(), b.shape(), "add");
  auto out = map_binary(a.value(), b.value(), [](T x, T y) { return x + y; });
  return a.tape().record(std::move(out), {a, b},
                         [a, b](const BasicTensor<T>& up, Tape<T>& tape) {
                           tape.accumulate(a, up);
                           tape.accumulate(b, up);
                         });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_tape(a, b);
  require_same_shape(a.shape(), b.shape(), "sub");
  auto out = map_binary(a.value(), b.value(), [](T x, T y) { return x - y; });
  return a.tape().record(std::move(out), {a, b},
                         [a, b](const BasicTensor<T>& up, Tape<T>& tape) {
                           tape.accumulate(a, up);
                           if (b.tracked()) {
                             BasicTensor<T> neg(up.shape());
                             for (std::size_t i = 0; i < up.size(); ++i) neg[i] = -up[i];
                             tape.accumulate(b, std::move(neg));
                           }
                         });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_tape(a, b);
  require_same_shape(a.shape(), b.shape(), "mul");
  auto out = map_binary(a.value(), b.value(), [](T x, T y) { return x * y; });
  return a.tape().record(std::move(out), {a, b},
                         [a, b](const BasicTensor<T>& up, Tape<T>& tape) {
                           if (a.tracked()) {
                             tape.accumulate(a, map_binary(up, b.value(),
                                                           [](T g, T y) { return g * y; }));
                           }
                           if (b.tracked()) {
                             tape.accumulate(b, map_binary(up, a.value(),
                                                           [](T g, T x) { return g * x; }));
                           }
                         });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  BasicTensor<T> out(a.shape());
  const auto& x = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return a.tape().record(std::move(out), {a}, [a, factor](const BasicTensor<T>& up, Tape<T>& tape) {
    BasicTensor<T> g(up.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = up[i] * factor;
    tape.accumulate(a, std::move(g));
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  BasicTensor<T> out(a.shape());
  const auto& x = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > T{0} ? x[i] : T{0};
  return a.tape().record(std::move(out), {a}, [a](const BasicTensor<T>& up, Tape<T>& tape) {
    const auto& x = a.value();
    BasicTensor<T> g(up.shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = x[i] > T{0} ? up[i] : T{0};
    tape.accumulate(a, std::move(g));
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T total{0};
  for (T v : a.value().data()) total += v;
  return a.tape().record(BasicTensor<T>::scalar(total), {a},
                         [a](const BasicTensor<T>& up, Tape<T>& tape) {
                           tape.accumulate(a, BasicTensor<T>::full(a.shape(), up[0]));
                         });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  if (shape_size(shape) != a.value().size()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                         shape_to_string(shape));
  }
  auto out = a.value().reshape(std::move(shape));
  return a.tape().record(std::move(out), {a}, [a](const BasicTensor<T>& up, Tape<T>& tape) {
    tape.accumulate(a, up.reshape(a.shape()));
  });
}

template <typename T>
Var<T> add_bias(const Var<T>& x, const Var<T>& bias) {
  require_same_tape(x, bias);
  const auto& xv = x.value();
  const auto& bv = bias.value();
  if (xv.rank() != 2 || bv.rank() != 1 || xv.dim(1) != bv.dim(0)) {
    throw DimensionError("add_bias: incompatible shapes " + shape_to_string(xv.shape()) + " and " +
                         shape_to_string(bv.shape()));
  }
  const std::size_t rows = xv.dim(0);
  const std::size_t cols = xv.dim(1);
  BasicTensor<T> out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = xv[r * cols + c] + bv[c];
  }
  return x.tape().record(std::move(out), {x, bias},
                         [x, bias, rows, cols](const BasicTensor<T>& up, Tape<T>& tape) {
                           tape.accumulate(x, up);
                           if (bias.tracked()) {
                             BasicTensor<T> db(bias.shape());
                             for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t c = 0; c < cols; ++c) db[c] += up[r * cols + c];
                             }
                             tape.accumulate(bias, std::move(db));
                           }
                         });
}

namespace {

struct ConvGeometry {
  std::size_t n, c, h, w;  // input
  std::size_t f, k, pad;   // filters
  std::size_t oh, ow;      // output spatial
  std::size_t patch() const { return c * k * k; }
  std::size_t plane() const { return oh * ow; }
};

// Unfolds images [n0, n1) into a (C*k*k) x ((n1-n0)*oh*ow) row-major matrix.
template <typename T>
void im2col(const T* x, const ConvGeometry& g, std::size_t n0, std::size_t n1, T* cols) {
  const std::size_t width = (n1 - n0) * g.plane();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj, ++row) {
        T* dst = cols + row * width;
        for (std::size_t n = n0; n < n1; ++n) {
          const T* src = x + (n * g.c + c) * g.h * g.w;
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy + ki) - static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
              std::fill_n(dst, g.ow, T{0});
              dst += g.ow;
              continue;
            }
            const T* srow = src + static_cast<std::size_t>(iy) * g.w;
            for (std::size_t ox = 0; ox < g.ow; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox + kj) - static_cast<std::ptrdiff_t>(g.pad);
              *dst++ = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? T{0} : srow[ix];
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds a column matrix back into images [n0, n1).
template <typename T>
void col2im(const T* cols, const ConvGeometry& g, std::size_t n0, std::size_t n1, T* dx) {
  const std::size_t width = (n1 - n0) * g.plane();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj, ++row) {
        const T* src = cols + row * width;
        for (std::size_t n = n0; n < n1; ++n) {
          T* dst = dx + (n * g.c + c) * g.h * g.w;
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy + ki) - static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
              src += g.ow;
              continue;
            }
            T* drow = dst + static_cast<std::size_t>(iy) * g.w;
            for (std::size_t ox = 0; ox < g.ow; ++ox, ++src) {
              const auto ix = static_cast<std::ptrdiff_t>(ox + kj) - static_cast<std::ptrdiff_t>(g.pad);
              if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) drow[ix] += *src;
            }
          }
        }
      }
    }
  }
}

struct Chunk {
  std::size_t begin, end;
};

std::vector<Chunk> batch_chunks(std::size_t n) {
  const std::size_t workers = std::min(worker_count(), n);
  std::vector<Chunk> chunks;
  const std::size_t step = (n + workers - 1) / workers;
  for (std::size_t b = 0; b < n; b += step) chunks.push_back({b, std::min(n, b + step)});
  return chunks;
}

template <typename F>
void for_each_chunk(const std::vector<Chunk>& chunks, F&& fn) {
  parallel_chunks(chunks.size(), [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i, chunks[i]);
  });
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& weights, const Var<T>& bias,
              std::size_t padding) {
  require_same_tape(input, weights);
  require_same_tape(input, bias);
  const auto& xv = input.value();
  const auto& wv = weights.value();
  const auto& bv = bias.value();
  if (xv.rank() != 4 || wv.rank() != 4 || bv.rank() != 1) {
    throw DimensionError("conv2d: expected input [N,C,H,W], weights [F,C,k,k], bias [F]; got " +
                         shape_to_string(xv.shape()) + ", " + shape_to_string(wv.shape()) + ", " +
                         shape_to_string(bv.shape()));
  }
  if (wv.dim(1) != xv.dim(1)) {
    throw DimensionError("conv2d: channel mismatch between input " + shape_to_string(xv.shape()) +
                         " and weights " + shape_to_string(wv.shape()));
  }
  if (wv.dim(2) != wv.dim(3)) {
    throw DimensionError("conv2d: kernel must be square, got " + shape_to_string(wv.shape()));
  }
  if (bv.dim(0) != wv.dim(0)) {
    throw DimensionError("conv2d: bias " + shape_to_string(bv.shape()) + " does not match filters " +
                         shape_to_string(wv.shape()));
  }
  const std::size_t k = wv.dim(2);
  if (k != 3 && k != 5) {
    throw ContractError("conv2d: kernel size must be 3 or 5, got " + std::to_string(k));
  }
  if (xv.dim(2) + 2 * padding < k || xv.dim(3) + 2 * padding < k) {
    throw DimensionError("conv2d: input " + shape_to_string(xv.shape()) + " with padding " +
                         std::to_string(padding) + " is smaller than a " + std::to_string(k) + "x" +
                         std::to_string(k) + " kernel");
  }

  ConvGeometry g{xv.dim(0), xv.dim(1), xv.dim(2), xv.dim(3), wv.dim(0), k, padding, 0, 0};
  g.oh = g.h + 2 * padding - k + 1;
  g.ow = g.w + 2 * padding - k + 1;

  const auto chunks = batch_chunks(g.n);
  auto cols = std::make_shared<std::vector<std::vector<T>>>(chunks.size());
  BasicTensor<T> out({g.n, g.f, g.oh, g.ow});
  const auto F = static_cast<Eigen::Index>(g.f);
  const auto K = static_cast<Eigen::Index>(g.patch());

  for_each_chunk(chunks, [&](std::size_t ci, Chunk ch) {
    const std::size_t width = (ch.end - ch.begin) * g.plane();
    auto& col = (*cols)[ci];
    col.resize(g.patch() * width);
    im2col(xv.data().data(), g, ch.begin, ch.end, col.data());
    MatR<T> prod(F, static_cast<Eigen::Index>(width));
    prod.noalias() = CMapR<T>(wv.data().data(), F, K) *
                     CMapR<T>(col.data(), K, static_cast<Eigen::Index>(width));
    for (std::size_t n = ch.begin; n < ch.end; ++n) {
      for (std::size_t f = 0; f < g.f; ++f) {
        const T* src = prod.data() + f * width + (n - ch.begin) * g.plane();
        T* dst = out.data().data() + (n * g.f + f) * g.plane();
        const T b = bv[f];
        for (std::size_t p = 0; p < g.plane(); ++p) dst[p] = src[p] + b;
      }
    }
  });

  return input.tape().record(
      std::move(out), {input, weights, bias},
      [input, weights, bias, g, chunks, cols](const BasicTensor<T>& up, Tape<T>& tape) {
        const auto F = static_cast<Eigen::Index>(g.f);
        const auto K = static_cast<Eigen::Index>(g.patch());
        const bool need_dx = input.tracked();
        const bool need_dw = weights.tracked();
        const auto& wv = weights.value();

        if (bias.tracked()) {
          BasicTensor<T> db(bias.shape());
          for (std::size_t n = 0; n < g.n; ++n) {
            for (std::size_t f = 0; f < g.f; ++f) {
              const T* src = up.data().data() + (n * g.f + f) * g.plane();
              T acc{0};
              for (std::size_t p = 0; p < g.plane(); ++p) acc += src[p];
              db[f] += acc;
            }
          }
          tape.accumulate(bias, std::move(db));
        }
        if (!need_dx && !need_dw) return;

        std::vector<MatR<T>> dw_parts(chunks.size());
        BasicTensor<T> dx = need_dx ? BasicTensor<T>(input.shape()) : BasicTensor<T>();
        for_each_chunk(chunks, [&](std::size_t ci, Chunk ch) {
          const std::size_t width = (ch.end - ch.begin) * g.plane();
          const auto W = static_cast<Eigen::Index>(width);
          MatR<T> dout(F, W);
          for (std::size_t n = ch.begin; n < ch.end; ++n) {
            for (std::size_t f = 0; f < g.f; ++f) {
              const T* src = up.data().data() + (n * g.f + f) * g.plane();
              std::copy_n(src, g.plane(), dout.data() + f * width + (n - ch.begin) * g.plane());
            }
          }
          const auto& col = (*cols)[ci];
          if (need_dw) {
            dw_parts[ci].noalias() = dout * CMapR<T>(col.data(), K, W).transpose();
          }
          if (need_dx) {
            MatR<T> dcol(K, W);
            dcol.noalias() = CMapR<T>(wv.data().data(), F, K).transpose() * dout;
            col2im(dcol.data(), g, ch.begin, ch.end, dx.data().data());
          }
        });
        if (need_dw) {
          BasicTensor<T> dw(weights.shape());
          MapR<T> acc(dw.data().data(), F, K);
          for (const auto& part : dw_parts) acc += part;
          tape.accumulate(weights, std::move(dw));
        }
        if (need_dx) tape.accumulate(input, std::move(dx));
      });
}

template <typename T>
Var<T> maxpool2d(const Var<T>& input, std::size_t window) {
  const auto& xv = input.value();
  if (xv.rank() != 4) {
    throw DimensionError("maxpool2d: expected [N,C,H,W], got " + shape_to_string(xv.shape()));
  }
  if (window != 2 && window != 4) {
    throw ContractError("maxpool2d: window must be 2 or 4, got " + std::to_string(window));
  }
  const std::size_t n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  if (h % window != 0 || w % window != 0) {
    throw DimensionError("maxpool2d: spatial size " + shape_to_string(xv.shape()) +
                         " not divisible by window " + std::to_string(window));
  }
  const std::size_t oh = h / window, ow = w / window;
  BasicTensor<T> out({n, c, oh, ow});
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.size());
  const T* x = xv.data().data();
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = base + (oy * window) * w + ox * window;
        T best_value = x[best];
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::size_t idx = base + (oy * window + dy) * w + ox * window + dx;
            if (x[idx] > best_value) {
              best_value = x[idx];
              best = idx;
            }
          }
        }
        out[o] = best_value;
        (*argmax)[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return input.tape().record(std::move(out), {input},
                             [input, argmax](const BasicTensor<T>& up, Tape<T>& tape) {
                               BasicTensor<T> dx(input.shape());
                               for (std::size_t i = 0; i < up.size(); ++i) dx[(*argmax)[i]] += up[i];
                               tape.accumulate(input, std::move(dx));
                             });
}

template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, std::span<const std::int32_t> labels) {
  const auto& zv = logits.value();
  if (zv.rank() != 2) {
    throw DimensionError("softmax_cross_entropy: logits must be [N x K], got " +
                         shape_to_string(zv.shape()));
  }
  const std::size_t n = zv.dim(0), k = zv.dim(1);
  if (labels.size() != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
  }
  auto label_copy = std::make_shared<std::vector<std::int32_t>>(labels.begin(), labels.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw ContractError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                          " at row " + std::to_string(i) + " outside [0, " + std::to_string(k) + ")");
    }
  }
  auto probs = std::make_shared<std::vector<T>>(n * k);
  T total{0};
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = zv.data().data() + i * k;
    const T peak = *std::max_element(row, row + k);
    T denom{0};
    for (std::size_t j = 0; j < k; ++j) {
      const T e = std::exp(row[j] - peak);
      (*probs)[i * k + j] = e;
      denom += e;
    }
    for (std::size_t j = 0; j < k; ++j) (*probs)[i * k + j] /= denom;
    total += std::log(denom) - (row[labels[i]] - peak);
  }
  const T loss = total / static_cast<T>(n);
  return logits.tape().record(
      BasicTensor<T>::scalar(loss), {logits},
      [logits, probs, label_copy, n, k](const BasicTensor<T>& up, Tape<T>& tape) {
        BasicTensor<T> g(logits.shape());
        const T s = up[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < k; ++j) g[i * k + j] = (*probs)[i * k + j] * s;
          g[i * k + static_cast<std::size_t>((*label_copy)[i])] -= s;
        }
        tape.accumulate(logits, std::move(g));
      });
}

#define NEGCNN_INSTANTIATE_OPS(T)                                                          \
  template Var<T> matmul<T>(const Var<T>&, const Var<T>&);                                 \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                    \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                    \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                    \
  template Var<T> scale<T>(const Var<T>&, T);                                              \
  template Var<T> relu<T>(const Var<T>&);                                                  \
  template Var<T> sum<T>(const Var<T>&);                                                   \
  template Var<T> reshape<T>(const Var<T>&, Shape);                                        \
  template Var<T> add_bias<T>(const Var<T>&, const Var<T>&);                               \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t);     \
  template Var<T> maxpool2d<T>(const Var<T>&, std::size_t);                                \
  template Var<T> softmax_cross_entropy<T>(const Var<T>&, std::span<const std::int32_t>);

NEGCNN_INSTANTIATE_OPS(float)
NEGCNN_INSTANTIATE_OPS(double)

#undef NEGCNN_INSTANTIATE_OPS

}  // namespace negcnn::ops
