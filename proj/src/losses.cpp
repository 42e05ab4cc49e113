#include <graftkit/losses.hpp>

#include <cmath>
#include <stdexcept>

namespace graftkit {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(who) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

double mse(const Tensor& a, const Tensor& b, const char* who) {
  require_same_shape(a, b, who);
  if (a.numel() == 0) throw std::invalid_argument(std::string(who) + ": empty tensor");
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    const double d = b[i] - a[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.numel());
}

// d MSE(a, b) / d b = 2 (b - a) / numel.
Tensor mse_grad(const Tensor& a, const Tensor& b, const char* who) {
  require_same_shape(a, b, who);
  if (a.numel() == 0) throw std::invalid_argument(std::string(who) + ": empty tensor");
  Tensor g(b.shape());
  const double scale = 2.0 / static_cast<double>(a.numel());
  for (std::int64_t i = 0; i < a.numel(); ++i) g[i] = scale * (b[i] - a[i]);
  return g;
}

// Feature maps arrive as (n, c, h, w) or (n, c); normalize to (n, c, s).
struct FeatureView {
  std::int64_t n, c, s;
};

FeatureView feature_view(const Tensor& f, const char* who) {
  if (f.numel() == 0) throw std::invalid_argument(std::string(who) + ": empty tensor");
  if (f.rank() == 4) return {f.dim(0), f.dim(1), f.dim(2) * f.dim(3)};
  if (f.rank() == 2) return {f.dim(0), f.dim(1), 1};
  throw std::invalid_argument(std::string(who) + ": expected (n, c, h, w) or (n, c) tensor, got " +
                              shape_str(f.shape()));
}

}  // namespace

double frl(const Tensor& h, const Tensor& h_hat) { return mse(h, h_hat, "frl"); }
Tensor frl_grad(const Tensor& h, const Tensor& h_hat) { return mse_grad(h, h_hat, "frl"); }

double fel(const Tensor& r, const Tensor& r_hat) { return mse(r, r_hat, "fel"); }
Tensor fel_grad(const Tensor& r, const Tensor& r_hat) { return mse_grad(r, r_hat, "fel"); }

Tensor gram(const Tensor& f) {
  const FeatureView v = feature_view(f, "gram");
  Tensor g({v.c, v.c});
  std::vector<double> centered(static_cast<std::size_t>(v.c * v.s));
  for (std::int64_t t = 0; t < v.n; ++t) {
    const double* sample = f.data() + t * v.c * v.s;
    for (std::int64_t i = 0; i < v.c; ++i) {
      const double* ch = sample + i * v.s;
      double mean = 0.0;
      for (std::int64_t k = 0; k < v.s; ++k) mean += ch[k];
      mean /= static_cast<double>(v.s);
      double* out = centered.data() + i * v.s;
      for (std::int64_t k = 0; k < v.s; ++k) out[k] = ch[k] - mean;
    }
    for (std::int64_t i = 0; i < v.c; ++i) {
      const double* ci = centered.data() + i * v.s;
      for (std::int64_t j = i; j < v.c; ++j) {
        const double* cj = centered.data() + j * v.s;
        double acc = 0.0;
        for (std::int64_t k = 0; k < v.s; ++k) acc += ci[k] * cj[k];
        g(i, j) += acc;
        if (j != i) g(j, i) += acc;
      }
    }
  }
  return g;
}

double gram_mse(const Tensor& f_ref, const Tensor& f_hat) {
  require_same_shape(f_ref, f_hat, "gram_mse");
  return mse(gram(f_ref), gram(f_hat), "gram_mse");
}

Tensor gram_mse_grad(const Tensor& f_ref, const Tensor& f_hat) {
  require_same_shape(f_ref, f_hat, "gram_mse");
  const FeatureView v = feature_view(f_hat, "gram_mse");
  const Tensor g_ref = gram(f_ref);
  const Tensor g_hat = gram(f_hat);

  // d MSE / d Gram(f_hat), symmetric.
  Tensor m({v.c, v.c});
  const double scale = 2.0 / static_cast<double>(v.c * v.c);
  for (std::int64_t i = 0; i < v.c * v.c; ++i) m[i] = scale * (g_hat[i] - g_ref[i]);

  // Per sample: d/dF~ = (M + M^T) F~ = 2 M F~, then undo the centering by
  // removing each channel row's mean from its gradient.
  Tensor grad(f_hat.shape());
  std::vector<double> centered(static_cast<std::size_t>(v.c * v.s));
  std::vector<double> row(static_cast<std::size_t>(v.s));
  for (std::int64_t t = 0; t < v.n; ++t) {
    const double* sample = f_hat.data() + t * v.c * v.s;
    for (std::int64_t i = 0; i < v.c; ++i) {
      const double* ch = sample + i * v.s;
      double mean = 0.0;
      for (std::int64_t k = 0; k < v.s; ++k) mean += ch[k];
      mean /= static_cast<double>(v.s);
      double* out = centered.data() + i * v.s;
      for (std::int64_t k = 0; k < v.s; ++k) out[k] = ch[k] - mean;
    }
    double* gsample = grad.data() + t * v.c * v.s;
    for (std::int64_t i = 0; i < v.c; ++i) {
      for (std::int64_t k = 0; k < v.s; ++k) row[static_cast<std::size_t>(k)] = 0.0;
      const double* mrow = &m(i, 0);
      for (std::int64_t j = 0; j < v.c; ++j) {
        const double mij = 2.0 * mrow[j];
        if (mij == 0.0) continue;
        const double* cj = centered.data() + j * v.s;
        for (std::int64_t k = 0; k < v.s; ++k) row[static_cast<std::size_t>(k)] += mij * cj[k];
      }
      double row_mean = 0.0;
      for (std::int64_t k = 0; k < v.s; ++k) row_mean += row[static_cast<std::size_t>(k)];
      row_mean /= static_cast<double>(v.s);
      double* out = gsample + i * v.s;
      for (std::int64_t k = 0; k < v.s; ++k) out[k] = row[static_cast<std::size_t>(k)] - row_mean;
    }
  }
  return grad;
}

double fsl(const Tensor& h, const Tensor& h_hat, const Tensor& r, const Tensor& r_hat,
           double gamma_h, double gamma_r) {
  require_same_shape(h, h_hat, "fsl");
  require_same_shape(r, r_hat, "fsl");
  double value = 0.0;
  if (gamma_h != 0.0) value += gamma_h * gram_mse(h, h_hat);
  if (gamma_r != 0.0) value += gamma_r * gram_mse(r, r_hat);
  return value;
}

std::pair<Tensor, Tensor> fsl_grad(const Tensor& h, const Tensor& h_hat, const Tensor& r,
                                   const Tensor& r_hat, double gamma_h, double gamma_r) {
  require_same_shape(h, h_hat, "fsl");
  require_same_shape(r, r_hat, "fsl");
  Tensor dh(h_hat.shape());
  Tensor dr(r_hat.shape());
  if (gamma_h != 0.0) {
    dh = gram_mse_grad(h, h_hat);
    for (std::int64_t i = 0; i < dh.numel(); ++i) dh[i] *= gamma_h;
  }
  if (gamma_r != 0.0) {
    dr = gram_mse_grad(r, r_hat);
    for (std::int64_t i = 0; i < dr.numel(); ++i) dr[i] *= gamma_r;
  }
  return {std::move(dh), std::move(dr)};
}

LossBreakdown total_loss(const Tensor& h, const Tensor& h_hat, const Tensor& r,
                         const Tensor& r_hat, const LossWeights& w) {
  LossBreakdown out;
  out.frl = frl(h, h_hat);
  out.fel = fel(r, r_hat);
  out.fsl = fsl(h, h_hat, r, r_hat, w.gamma_h, w.gamma_r);
  out.total = w.alpha * out.frl + w.beta * out.fel + out.fsl;
  return out;
}

}  // namespace graftkit
