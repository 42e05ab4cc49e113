#pragma once

#include <utility>

#include <graftkit/tensor.hpp>

namespace graftkit {

/*
 * Weights of the combined training objective
 *   total = alpha * FRL + beta * FEL + FSL
 * with FSL = gamma_h * MSE(Gram(H), Gram(H^)) + gamma_r * MSE(Gram(R), Gram(R^)).
 *
 * Gram matrices are left unnormalized, which is why the stock gamma values
 * are large. Configuration keeps gamma_h to {1e5, 1e6, 1e7} unless custom
 * values are explicitly allowed.
 */
struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma_h = 1e6;
  double gamma_r = 1e7;
};

struct LossBreakdown {
  double frl = 0.0;
  double fel = 0.0;
  double fsl = 0.0;
  double total = 0.0;
};

// Feature reconstruction loss: mean squared difference between the
// pretrained front end features and the grafted front end features.
double frl(const Tensor& h, const Tensor& h_hat);
// d frl / d h_hat.
Tensor frl_grad(const Tensor& h, const Tensor& h_hat);

// Feature evaluation loss: mean squared difference between middle net
// features. r_hat must come from pushing the grafted features through the
// same frozen middle net that produced r.
double fel(const Tensor& r, const Tensor& r_hat);
// d fel / d r_hat.
Tensor fel_grad(const Tensor& r, const Tensor& r_hat);

// Mean-subtracted Gram matrix, summed over the batch: channels are
// flattened to spatial vectors, each vector is centered per sample, and
// Gram(F)[i][j] accumulates the channel inner products. Accepts (n, c, h, w)
// feature maps or (n, c) vectors (spatial size 1). Result is (c, c),
// symmetric positive semidefinite.
Tensor gram(const Tensor& f);

// MSE between the two Gram matrices (mean over the c*c entries).
double gram_mse(const Tensor& f_ref, const Tensor& f_hat);
// d gram_mse / d f_hat.
Tensor gram_mse_grad(const Tensor& f_ref, const Tensor& f_hat);

// Feature style loss over the two paired feature stages.
double fsl(const Tensor& h, const Tensor& h_hat, const Tensor& r, const Tensor& r_hat,
           double gamma_h, double gamma_r);
// (d fsl / d h_hat, d fsl / d r_hat).
std::pair<Tensor, Tensor> fsl_grad(const Tensor& h, const Tensor& h_hat, const Tensor& r,
                                   const Tensor& r_hat, double gamma_h, double gamma_r);

LossBreakdown total_loss(const Tensor& h, const Tensor& h_hat, const Tensor& r,
                         const Tensor& r_hat, const LossWeights& w);

}  // namespace graftkit
