#pragma once

#include <memory>
#include <string>
#include <vector>

namespace rcbsde {

enum class BasisKind { polynomial, partition, cellpoly };

// Feature basis for the conditional-expectation regressions.
//  polynomial - total-degree polynomial over all feature columns (degree <= 6)
//  partition  - piecewise constant on a uniform hypercube partition
//  cellpoly   - cells in the last feature column (the randomization coordinate
//               w, with cell edges anchored to the control ball and merged to
//               a minimum occupancy), local polynomial in the other columns;
//               expects feature columns [x, payoff(x), w]
struct BasisSpec {
    BasisKind kind = BasisKind::polynomial;
    int degree = 3;             // polynomial total degree
    int cells_per_dim = 8;      // partition kind
    // cellpoly parameters
    double ball_center = 0.0;
    double ball_radius = 1.0;
    int min_cell_occupancy = 400;
    bool ridge_fallback = true;  // rank-deficient designs fall back to ridge

    std::string kind_name() const;
    static BasisKind parse_kind(const std::string& name);
};

// Column-major feature table: n rows (paths), m columns.
struct FeatureTable {
    int n_rows = 0;
    std::vector<std::vector<double>> columns;

    int n_cols() const { return int(columns.size()); }
};

// A fitted least-squares projection. fitted() are the in-sample projections;
// predict() evaluates the fitted function elsewhere (inputs clamped to the
// training range and outputs to the fitted range, so downstream control
// variates stay on-support even when the design is nearly rank deficient).
class Fit {
  public:
    virtual ~Fit() = default;
    virtual const std::vector<double>& fitted() const = 0;
    virtual std::vector<double> predict(const FeatureTable& features) const = 0;
    // Pointwise regression-noise scale of the fitted values (HC0 sandwich).
    virtual std::vector<double> noise_scale(const std::vector<double>& residual) const = 0;
    virtual int n_coefficients() const = 0;
    virtual std::vector<double> coefficients() const = 0;
};

// Shared design structure for one (features, basis) pair; fitting different
// target vectors against the same design reuses the factorization.
class Design {
  public:
    virtual ~Design() = default;
    virtual std::unique_ptr<Fit> fit(const std::vector<double>& targets) const = 0;
};

std::unique_ptr<Design> build_design(const FeatureTable& features, const BasisSpec& basis);

struct FitPredictResult {
    std::vector<double> fitted;
    std::vector<double> coefficients;
};

// One-shot projection of targets onto the basis span (empirical inner
// product). Throws std::runtime_error("singular design") when the design is
// rank deficient and the ridge fallback is disabled.
FitPredictResult fit_predict(const FeatureTable& features, const std::vector<double>& targets,
                             const BasisSpec& basis);

}  // namespace rcbsde
