#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kdvlab/homological.hpp"
#include "kdvlab/paradiff.hpp"

namespace kdvlab {

/// eps^a y^beta monomial; the grading unit of the smallness bookkeeping.
struct Monomial {
  int eps = 0;
  std::vector<int> beta;

  int degree() const;
  double eval(const PhasePoint& x) const;
  bool operator<(const Monomial& o) const;
  bool operator==(const Monomial& o) const { return eps == o.eps && beta == o.beta; }

  static Monomial one(int p);
  static Monomial eps1(int p);
  static Monomial y(int p, int i, int power = 1);
};

/// Operator-valued quadratic Hamiltonian block <B(theta, y) w, w>: the
/// para-differential symbol part plus an explicit smoothing kernel, each
/// carried per (eps, y)-monomial of degree <= 1.
struct QuadBlock {
  // symbol terms: order m -> monomial -> coefficient field (ell, x-mode)
  std::map<int, std::map<Monomial, TorusField>> symbol;
  // smoothing kernels per monomial (linear kernels (ell, j, j'))
  std::map<Monomial, SmoothingKernel> smooth;
};

/// Taylor-truncated Hamiltonian on V^s(delta): normal-form part
/// omega.y + (1/2) Omega_{S_+}[y].y + (1/2) <D^{-1} Omega_perp w, w>, the
/// eps-linear blocks, and the order-three perturbation families.
struct TaylorHamiltonian {
  int p = 1;            // |S_+|
  int L = 4;            // theta-mode bound
  int J = 16;           // S_perp window
  int xband = 16;       // coefficient band of symbol fields
  ModeSet modes;
  std::vector<std::vector<double>> omega_spp;  // Omega_{S_+} matrix (p x p)

  // eps-linear blocks (degree one)
  TorusField P00;               // scalar
  std::vector<TorusField> P10;  // p components, scalar fields
  TorusField P01;               // (ell, j)

  // degree-three families (the P^{(2)}-shape of the paper's expansion)
  TorusField P00_3;                            // eps^3 scalar
  std::vector<TorusField> P10_3;               // eps^2 y
  std::vector<std::vector<TorusField>> P20_3;  // eps y^2, symmetric
  std::vector<std::vector<std::vector<TorusField>>> P30_3;  // y^3, symmetric
  TorusField P01_3;                            // eps^2 <.,w>
  std::vector<TorusField> P11_3;               // eps y <.,w>
  std::vector<std::vector<TorusField>> P21_3;  // y^2 <.,w>
  QuadBlock P02;                               // <P02(theta,y) w, w>, (eps,y)-affine
  std::optional<SmoothingKernel> P03;          // trilinear kernel (symmetric)

  static TaylorHamiltonian empty(int p, int L, int J, int xband, ModeSet modes);

  double max_abs_eps_blocks_offaverage() const;
};

struct Step1Generators {
  TorusField F00;
  std::vector<TorusField> F10;
  TorusField F01;
};

struct Step3Generators {
  std::vector<TorusField> F10;
  std::vector<std::vector<TorusField>> F20;
  std::vector<std::vector<std::vector<TorusField>>> F30;
  TorusField F01;
  std::vector<TorusField> F11;
  std::vector<std::vector<TorusField>> F21;
};

/// Normal-form data produced by the smoothing steps: hat-omega and Q(y).
struct NormalFormPart {
  double n00 = 0.0;                          // <P00> + eps <P00^{(1)}> constant (dropped)
  std::vector<double> omega_hat_const;       // <P10>
  std::vector<double> omega_hat_eps;         // <P10^{(2)}> (enters as eps * .)
  std::vector<std::vector<double>> q_eps;    // eps <P20^{(2)}> [y,y]
  std::vector<std::vector<std::vector<double>>> q_cubic;  // <P30^{(2)}>[y,y,y]
};

/// Step 1: normalize the eps-linear blocks (zeroth/first Melnikov).
Step1Generators step1_normalize_linear(TaylorHamiltonian& H, const FrequencyModel& model,
                                       TorusField* new_eps2_block = nullptr);

/// Step 2: normalize the eps^2 scalar block produced by step 1.
TorusField step2_normalize_eps2(TorusField& eps2_block, const FrequencyModel& model);

/// Step 3: normalize all order-three blocks affine in w; assembles hat-omega
/// and Q(y).
Step3Generators step3_normalize_affine(TaylorHamiltonian& H, const FrequencyModel& model,
                                       NormalFormPart& nf);

/// The para-differential vector field tracked through Section-6 steps:
/// X^perp = i Omega_perp w + multipliers + symbols + smoothing (+ an
/// evaluable order-three residue), X^theta = -omega - eps hat-omega
/// - grad Q - Upsilon2[w,w], X^y = order three.
struct NormalVectorField {
  int p = 1, L = 4, J = 16, xband = 16, depth = 2;
  ModeSet modes;
  CutoffFunction cutoff;
  std::vector<double> omega;
  std::vector<std::vector<double>> omega_spp;
  NormalFormPart nf;

  // Fourier-multiplier parts: order (1-k) -> monomial -> scalar field
  std::map<int, std::map<Monomial, TorusField>> mult_w;
  // w-linear multiplier coefficients Lambda_{1-k}(theta)[w] = sum sigma(l,j) w_j
  std::map<int, TorusField> mult_ww;
  // theta-independent diagonal multiplier (Z^perp), per monomial; indexed
  // by the perp window order of modes().perp_window(J)
  std::map<Monomial, std::vector<cplx>> zdiag;

  // symbol parts: order -> monomial -> coefficient (ell, x-mode)
  std::map<int, std::map<Monomial, TorusField>> sym_w;
  // quadratic symbol: order -> tensor (ell, x-mode, j) stored as linear kernel
  std::map<int, SmoothingKernel> sym_ww;

  // smoothing parts
  std::map<Monomial, SmoothingKernel> smooth_w;    // linear kernels
  std::map<Monomial, SmoothingKernel> smooth_ww;   // bilinear kernels

  // theta-component quadratic form Upsilon_2^(theta), per y-direction
  std::vector<SmoothingKernel> upsilon_theta;      // linear-kernel shape (ell,j,j')
  // resonant part Z^(theta) after the smoothing normalization, per direction
  std::vector<std::vector<cplx>> ztheta;           // [dir][perp index]

  // diagnostics accumulated during the pipeline
  std::vector<std::string> log;

  /// Dense (theta, y, w, eps)-frozen w-linear part of X^perp on the window
  /// (multipliers + symbols + linear smoothing; i Omega excluded by flag).
  DenseOp dense_linear_part(const PhasePoint& x, const FrequencyModel& model,
                            bool include_omega) const;

  /// Apply the full represented X^perp to the phase point's w.
  FourierSeries apply_perp(const PhasePoint& x, const FrequencyModel& model) const;

  /// theta-component evaluated at x (without the constant -omega part).
  std::vector<double> theta_component_variable(const PhasePoint& x) const;
};

/// Build the section-6 input field from a step-3-normalized Hamiltonian:
/// X^perp = i Omega w + dx o (P02 + P02^T)[w] + 3 dx P03[w,w,.] and
/// Upsilon_2^theta = -grad_y <P02 w, w>.
NormalVectorField build_vector_field(const TaylorHamiltonian& H, const FrequencyModel& model,
                                     const CutoffFunction& cutoff, int depth);

struct SymbolStepResult {
  TorusField b_eps;                  // (1/3) dx^{-1} centered coefficient, eps slot
  std::vector<TorusField> b_y;       // y slots
  double cleared_residual = 0.0;     // max |a - 3 dx b - <a>| after the step
  double odd_mean_defect = 0.0;      // |<a_{1-n}>_x| when n is odd
  double diag_defect = 0.0;          // max |Re diag| of the w-linear part
};

/// One regularization step of the symbol iteration: clears the order (1-n)
/// coefficient, moves its x-average into the multiplier, updates lower
/// orders through the exact commutator formulas.
SymbolStepResult regularize_symbol_step(NormalVectorField& V, const FrequencyModel& model, int n);

struct MultiplierStepResult {
  std::map<int, TorusField> xi;  // generators per cleared order
  double residual = 0.0;
};

/// Removes the w-linear Fourier-multiplier blocks at orders <= 0 (first
/// Melnikov); the surviving part D_5 is skew-adjoint.
MultiplierStepResult normalize_multiplier_quadratic(NormalVectorField& V,
                                                    const FrequencyModel& model);

struct SmoothingStepResult {
  SecondMelnikovSolution s1_eps;  // representative slot diagnostics
  double residual_linear = 0.0;
  double residual_bilinear = 0.0;
  double residual_theta = 0.0;
};

/// Normalizes the linear/bilinear smoothing remainders and the quadratic
/// theta-block (second and third Melnikov conditions).
SmoothingStepResult normalize_smoothing(NormalVectorField& V, const FrequencyModel& model);

struct PipelineConfig {
  int depth = 2;  // N
  CutoffFunction cutoff;
  std::vector<double> order_scales = {0.5, 0.35, 0.25, 0.18, 0.125, 0.09};
};

struct PipelineReport {
  bool melnikov_ok = true;
  std::string abort_reason;
  double eps_linear_offaverage = 0.0;  // post-step-1/3 theta-dependence
  double residual_step1 = 0.0;
  double residual_step2 = 0.0;
  double residual_step3 = 0.0;
  double symbol_clear_residual = 0.0;
  double odd_mean_defect = 0.0;
  double diag_defect = 0.0;     // max |Re diag| across intermediate fields
  double skew_defect = 0.0;     // final ||D + D^T||_max on the window
  double multiplier_residual = 0.0;
  double smoothing_residual = 0.0;
  double order_y = 0.0;         // measured order of the y-component
  double order_a = 0.0;         // measured order of the surviving symbol
  double order_r = 0.0;         // measured order of the order-three residue
  std::vector<std::string> step_log;

  std::string to_text() const;
};

/// The six-stage run: steps 1-3 on the Hamiltonian, field construction,
/// N+2 symbol regularizations, multiplier normalization, smoothing
/// normalization, and the Theorem-shape verification.
PipelineReport full_pipeline(TaylorHamiltonian H, const FrequencyModel& model,
                             const PipelineConfig& config);

/// Least-squares slope of log ||g(scaled point)|| against log t; the
/// numerical proxy for "small of order p". Returns +infinity when every
/// evaluation sits below 1e-14.
double measured_order(const std::function<double(const PhasePoint&)>& g, const PhasePoint& base,
                      const std::vector<double>& scales);

struct DiagonalCheck {
  double max_real_defect = 0.0;
  std::vector<int> zero_mean_orders;  // even orders 1-k whose mean must vanish
};

/// Appendix-A check: the diagonal of a Hamiltonian w-linear block is purely
/// imaginary; for expansion inputs the x-averages at even orders vanish.
DiagonalCheck check_imaginary_diagonal(const DenseOp& X, const ModeSet& modes);

}  // namespace kdvlab
