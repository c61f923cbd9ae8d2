#include "rcbsde/regression.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <stdexcept>

namespace rcbsde {

std::string BasisSpec::kind_name() const {
    switch (kind) {
        case BasisKind::polynomial: return "polynomial";
        case BasisKind::partition: return "partition";
        case BasisKind::cellpoly: return "cellpoly";
    }
    return "?";
}

BasisKind BasisSpec::parse_kind(const std::string& name) {
    if (name == "polynomial") return BasisKind::polynomial;
    if (name == "partition") return BasisKind::partition;
    if (name == "cellpoly") return BasisKind::cellpoly;
    throw std::invalid_argument("unknown basis kind '" + name + "'");
}

namespace {

constexpr double kRankThreshold = 1e-8;

// numpy-style linear-interpolation quantile; deterministic O(n) selection.
double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    const double pos = q * double(v.size() - 1);
    const size_t lo = size_t(pos);
    std::nth_element(v.begin(), v.begin() + long(lo), v.end());
    const double vlo = v[lo];
    if (lo + 1 >= v.size()) return vlo;
    const double vhi = *std::min_element(v.begin() + long(lo) + 1, v.end());
    return vlo + (pos - double(lo)) * (vhi - vlo);
}

struct Standardizer {
    double mean = 0.0, scale = 1.0;

    static Standardizer from(const std::vector<double>& col) {
        Standardizer s;
        const double n = double(col.size());
        s.mean = std::accumulate(col.begin(), col.end(), 0.0) / n;
        double var = 0.0;
        for (double x : col) var += (x - s.mean) * (x - s.mean);
        s.scale = std::sqrt(var / n) + 1e-300;
        return s;
    }
    double operator()(double x) const { return (x - mean) / scale; }
};

// Rank-revealing least squares on one design block: thin orthonormal Q for
// projections and HC0 scales, pivoted QR for coefficients.
struct QrBlock {
    Eigen::MatrixXd thin_q;  // rows x rank
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
    int rank = 0;
    int cols = 0;

    void factor(const Eigen::MatrixXd& design) {
        cols = int(design.cols());
        qr.setThreshold(kRankThreshold);
        qr.compute(design);
        rank = int(qr.rank());
        thin_q = qr.householderQ() * Eigen::MatrixXd::Identity(design.rows(), rank);
    }
    Eigen::VectorXd project(const Eigen::VectorXd& y) const { return thin_q * (thin_q.transpose() * y); }
    Eigen::VectorXd coefficients(const Eigen::VectorXd& y) const { return qr.solve(y); }
    // HC0 sandwich: pointwise std of the fitted values given residuals.
    Eigen::VectorXd hc0(const Eigen::VectorXd& resid) const {
        const Eigen::MatrixXd m =
            thin_q.transpose() * (resid.array().square().matrix().asDiagonal() * thin_q);
        Eigen::VectorXd s(thin_q.rows());
        for (Eigen::Index i = 0; i < thin_q.rows(); ++i) {
            const double v = thin_q.row(i) * m * thin_q.row(i).transpose();
            s[i] = std::sqrt(std::max(v, 0.0));
        }
        return s;
    }
};

void check_feature_budget(int n_rows, int n_features) {
    if (n_features * 10 > n_rows)
        throw std::invalid_argument("feature count " + std::to_string(n_features) +
                                    " exceeds n_paths/10");
}

// Off-design evaluations of an ill-conditioned fit can leave the data range
// entirely (pure-jump states concentrate on a few atoms, leaving the local
// design nearly rank deficient); predictions are clamped to the fitted range
// so they stay usable as control variates.
std::array<double, 2> fitted_range(const std::vector<double>& fitted) {
    double lo = fitted.empty() ? 0.0 : fitted[0], hi = lo;
    for (double v : fitted) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {lo, hi};
}

// ---------------------------------------------------------------------------
// polynomial kind: total-degree monomials over standardized columns

std::vector<std::vector<int>> monomial_exponents(int n_vars, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(size_t(n_vars), 0);
    const std::function<void(int, int)> rec = [&](int var, int remaining) {
        if (var == n_vars) {
            out.push_back(cur);
            return;
        }
        for (int e = 0; e <= remaining; ++e) {
            cur[size_t(var)] = e;
            rec(var + 1, remaining - e);
        }
        cur[size_t(var)] = 0;
    };
    rec(0, degree);
    return out;
}

class PolynomialFit;

class PolynomialDesign : public Design {
  public:
    PolynomialDesign(const FeatureTable& features, const BasisSpec& spec) : spec_(spec) {
        if (spec.degree < 0 || spec.degree > 6)
            throw std::invalid_argument("polynomial degree must be in [0, 6]");
        const int m = features.n_cols();
        exponents_ = monomial_exponents(m, spec.degree);
        check_feature_budget(features.n_rows, int(exponents_.size()));
        std_.reserve(size_t(m));
        for (const auto& col : features.columns) std_.push_back(Standardizer::from(col));
        block_.factor(build_matrix(features));
        if (block_.rank < block_.cols && !spec.ridge_fallback)
            throw std::runtime_error("singular design");
    }

    Eigen::MatrixXd build_matrix(const FeatureTable& f) const {
        const int n = f.n_rows, m = f.n_cols();
        Eigen::MatrixXd a(n, int(exponents_.size()));
        std::vector<double> z(size_t(m), 0.0);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < m; ++j) z[size_t(j)] = std_[size_t(j)](f.columns[size_t(j)][size_t(i)]);
            for (size_t c = 0; c < exponents_.size(); ++c) {
                double v = 1.0;
                for (int j = 0; j < m; ++j)
                    for (int e = 0; e < exponents_[c][size_t(j)]; ++e) v *= z[size_t(j)];
                a(i, int(c)) = v;
            }
        }
        return a;
    }

    std::unique_ptr<Fit> fit(const std::vector<double>& targets) const override;

    BasisSpec spec_;
    std::vector<std::vector<int>> exponents_;
    std::vector<Standardizer> std_;
    QrBlock block_;
};

class PolynomialFit : public Fit {
  public:
    PolynomialFit(const PolynomialDesign* design, const std::vector<double>& targets)
        : design_(design) {
        const Eigen::Map<const Eigen::VectorXd> y(targets.data(), long(targets.size()));
        const Eigen::VectorXd proj = design_->block_.project(y);
        fitted_.assign(proj.data(), proj.data() + proj.size());
        coef_ = design_->block_.coefficients(y);
        fit_range_ = fitted_range(fitted_);
    }
    const std::vector<double>& fitted() const override { return fitted_; }
    std::vector<double> predict(const FeatureTable& features) const override {
        const Eigen::MatrixXd a = design_->build_matrix(features);
        std::vector<double> out(size_t(a.rows()), 0.0);
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            out[size_t(i)] = std::clamp((a.row(i) * coef_)(0, 0), fit_range_[0], fit_range_[1]);
        return out;
    }
    std::vector<double> noise_scale(const std::vector<double>& residual) const override {
        const Eigen::Map<const Eigen::VectorXd> r(residual.data(), long(residual.size()));
        const Eigen::VectorXd s = design_->block_.hc0(r);
        return {s.data(), s.data() + s.size()};
    }
    int n_coefficients() const override { return int(coef_.size()); }
    std::vector<double> coefficients() const override {
        return {coef_.data(), coef_.data() + coef_.size()};
    }

  private:
    const PolynomialDesign* design_;
    std::vector<double> fitted_;
    Eigen::VectorXd coef_;
    std::array<double, 2> fit_range_{};
};

std::unique_ptr<Fit> PolynomialDesign::fit(const std::vector<double>& targets) const {
    return std::make_unique<PolynomialFit>(this, targets);
}

// ---------------------------------------------------------------------------
// partition kind: uniform hypercube cells, local constants

class PartitionDesign : public Design {
  public:
    PartitionDesign(const FeatureTable& features, const BasisSpec& spec) {
        const int m = features.n_cols();
        cells_ = spec.cells_per_dim;
        n_cells_ = 1;
        for (int j = 0; j < m; ++j) n_cells_ *= cells_;
        check_feature_budget(features.n_rows, n_cells_);
        lo_.resize(size_t(m));
        hi_.resize(size_t(m));
        for (int j = 0; j < m; ++j) {
            const auto& col = features.columns[size_t(j)];
            lo_[size_t(j)] = *std::min_element(col.begin(), col.end());
            hi_[size_t(j)] = *std::max_element(col.begin(), col.end());
        }
        cell_of_.resize(size_t(features.n_rows));
        counts_.assign(size_t(n_cells_), 0);
        for (int i = 0; i < features.n_rows; ++i) {
            const int c = locate(features, i);
            cell_of_[size_t(i)] = c;
            ++counts_[size_t(c)];
        }
    }

    int locate(const FeatureTable& f, int row) const {
        int cell = 0;
        for (int j = 0; j < f.n_cols(); ++j) {
            const double span = hi_[size_t(j)] - lo_[size_t(j)];
            double u = span > 0.0 ? (f.columns[size_t(j)][size_t(row)] - lo_[size_t(j)]) / span : 0.0;
            u = std::clamp(u, 0.0, 1.0);
            int idx = std::min(int(u * cells_), cells_ - 1);
            cell = cell * cells_ + idx;
        }
        return cell;
    }

    std::unique_ptr<Fit> fit(const std::vector<double>& targets) const override;

    int cells_ = 1, n_cells_ = 1;
    std::vector<double> lo_, hi_;
    std::vector<int> cell_of_;
    std::vector<int> counts_;
};

class PartitionFit : public Fit {
  public:
    PartitionFit(const PartitionDesign* design, const std::vector<double>& targets)
        : design_(design) {
        means_.assign(size_t(design->n_cells_), 0.0);
        double total = 0.0;
        for (size_t i = 0; i < targets.size(); ++i) {
            means_[size_t(design->cell_of_[i])] += targets[i];
            total += targets[i];
        }
        grand_mean_ = total / double(targets.size());
        for (int c = 0; c < design->n_cells_; ++c)
            means_[size_t(c)] =
                design->counts_[size_t(c)] > 0 ? means_[size_t(c)] / design->counts_[size_t(c)]
                                               : grand_mean_;
        fitted_.resize(targets.size());
        for (size_t i = 0; i < targets.size(); ++i)
            fitted_[i] = means_[size_t(design->cell_of_[i])];
    }
    const std::vector<double>& fitted() const override { return fitted_; }
    std::vector<double> predict(const FeatureTable& features) const override {
        std::vector<double> out(size_t(features.n_rows), 0.0);
        for (int i = 0; i < features.n_rows; ++i)
            out[size_t(i)] = means_[size_t(design_->locate(features, i))];
        return out;
    }
    std::vector<double> noise_scale(const std::vector<double>& residual) const override {
        std::vector<double> acc(size_t(design_->n_cells_), 0.0);
        for (size_t i = 0; i < residual.size(); ++i)
            acc[size_t(design_->cell_of_[i])] += residual[i] * residual[i];
        std::vector<double> out(residual.size(), 0.0);
        for (size_t i = 0; i < residual.size(); ++i) {
            const int c = design_->cell_of_[i];
            if (design_->counts_[size_t(c)] > 0)
                out[i] = std::sqrt(acc[size_t(c)]) / design_->counts_[size_t(c)];
        }
        return out;
    }
    int n_coefficients() const override { return design_->n_cells_; }
    std::vector<double> coefficients() const override { return means_; }

  private:
    const PartitionDesign* design_;
    std::vector<double> means_;
    std::vector<double> fitted_;
    double grand_mean_ = 0.0;
};

std::unique_ptr<Fit> PartitionDesign::fit(const std::vector<double>& targets) const {
    return std::make_unique<PartitionFit>(this, targets);
}

// ---------------------------------------------------------------------------
// cellpoly kind: w-cells anchored to the control ball, occupancy-merged,
// local basis [1, xs, xs^2, ps, ps*xs] per cell. The randomization
// coordinate is deliberately not resolved within a cell: a w-flat fit keeps
// the penalty magnitude from feeding its own regression noise back into the
// recursion, which is what keeps large penalties stable.

class CellpolyDesign : public Design {
  public:
    CellpolyDesign(const FeatureTable& features, const BasisSpec& spec) {
        if (features.n_cols() != 3)
            throw std::invalid_argument("cellpoly expects feature columns [x, payoff, w]");
        const auto& xcol = features.columns[0];
        const auto& pcol = features.columns[1];
        const auto& wcol = features.columns[2];
        const int n = features.n_rows;

        x_std_ = Standardizer::from(xcol);
        p_std_ = Standardizer::from(pcol);
        clamp_lo_ = {quantile(xcol, 0.001), quantile(pcol, 0.001)};
        clamp_hi_ = {quantile(xcol, 0.999), quantile(pcol, 0.999)};

        // Candidate edges: ball landmarks plus outer quantiles of w; then
        // merge cells until each holds at least min_cell_occupancy paths.
        const double c = spec.ball_center, r = spec.ball_radius;
        std::set<double> cand_set;
        for (int i = 0; i < 5; ++i) cand_set.insert(round12(c - r + 0.5 * r * i));
        for (double q : {0.02, 0.10, 0.90, 0.98}) cand_set.insert(round12(quantile(wcol, q)));
        std::vector<double> cand(cand_set.begin(), cand_set.end());
        while (!cand.empty()) {
            std::vector<int> counts(cand.size() + 1, 0);
            for (int i = 0; i < n; ++i) ++counts[size_t(cell_index(cand, wcol[size_t(i)]))];
            int bad = -1;
            for (size_t j = 0; j < counts.size(); ++j)
                if (counts[j] < spec.min_cell_occupancy) {
                    bad = int(j);
                    break;
                }
            if (bad < 0) break;
            const size_t kill = bad > 0 ? std::min(size_t(bad), cand.size() - 1) : 0;
            cand.erase(cand.begin() + long(kill));
        }
        edges_ = cand;
        n_cells_ = int(edges_.size()) + 1;
        check_feature_budget(n, 5 * n_cells_);

        cell_of_.resize(size_t(n));
        std::vector<int> counts(size_t(n_cells_), 0);
        for (int i = 0; i < n; ++i) {
            cell_of_[size_t(i)] = cell_index(edges_, wcol[size_t(i)]);
            ++counts[size_t(cell_of_[size_t(i)])];
        }
        rows_.resize(size_t(n_cells_));
        for (int j = 0; j < n_cells_; ++j) rows_[size_t(j)].reserve(size_t(counts[size_t(j)]));
        for (int i = 0; i < n; ++i) rows_[size_t(cell_of_[size_t(i)])].push_back(i);

        blocks_.resize(size_t(n_cells_));
        for (int j = 0; j < n_cells_; ++j) {
            const auto& idx = rows_[size_t(j)];
            if (idx.empty()) continue;
            Eigen::MatrixXd a(long(idx.size()), 5);
            for (size_t k = 0; k < idx.size(); ++k)
                fill_row(a, long(k), xcol[size_t(idx[k])], pcol[size_t(idx[k])]);
            blocks_[size_t(j)].factor(a);
        }
    }

    static double round12(double v) { return std::round(v * 1e12) / 1e12; }

    static int cell_index(const std::vector<double>& edges, double w) {
        return int(std::lower_bound(edges.begin(), edges.end(), w) - edges.begin());
    }

    void fill_row(Eigen::MatrixXd& a, long row, double x, double p) const {
        const double xs = x_std_(x), ps = p_std_(p);
        a(row, 0) = 1.0;
        a(row, 1) = xs;
        a(row, 2) = xs * xs;
        a(row, 3) = ps;
        a(row, 4) = ps * xs;
    }

    std::unique_ptr<Fit> fit(const std::vector<double>& targets) const override;

    Standardizer x_std_, p_std_;
    std::array<double, 2> clamp_lo_{}, clamp_hi_{};
    std::vector<double> edges_;
    int n_cells_ = 1;
    std::vector<int> cell_of_;
    std::vector<std::vector<int>> rows_;
    std::vector<QrBlock> blocks_;
};

class CellpolyFit : public Fit {
  public:
    CellpolyFit(const CellpolyDesign* design, const std::vector<double>& targets)
        : design_(design) {
        fitted_.assign(targets.size(), 0.0);
        coef_.resize(size_t(design->n_cells_));
        for (int j = 0; j < design->n_cells_; ++j) {
            const auto& idx = design->rows_[size_t(j)];
            if (idx.empty()) continue;
            Eigen::VectorXd y(long(idx.size()));
            for (size_t k = 0; k < idx.size(); ++k) y[long(k)] = targets[size_t(idx[k])];
            const Eigen::VectorXd proj = design->blocks_[size_t(j)].project(y);
            for (size_t k = 0; k < idx.size(); ++k) fitted_[size_t(idx[k])] = proj[long(k)];
            coef_[size_t(j)] = design->blocks_[size_t(j)].coefficients(y);
        }
        fit_range_ = fitted_range(fitted_);
    }
    const std::vector<double>& fitted() const override { return fitted_; }
    std::vector<double> predict(const FeatureTable& features) const override {
        if (features.n_cols() != 3)
            throw std::invalid_argument("cellpoly expects feature columns [x, payoff, w]");
        std::vector<double> out(size_t(features.n_rows), 0.0);
        Eigen::MatrixXd rowm(1, 5);
        for (int i = 0; i < features.n_rows; ++i) {
            const double x = std::clamp(features.columns[0][size_t(i)], design_->clamp_lo_[0],
                                        design_->clamp_hi_[0]);
            const double p = std::clamp(features.columns[1][size_t(i)], design_->clamp_lo_[1],
                                        design_->clamp_hi_[1]);
            const int j = CellpolyDesign::cell_index(design_->edges_, features.columns[2][size_t(i)]);
            if (design_->rows_[size_t(j)].empty()) continue;
            design_->fill_row(rowm, 0, x, p);
            out[size_t(i)] =
                std::clamp((rowm * coef_[size_t(j)])(0, 0), fit_range_[0], fit_range_[1]);
        }
        return out;
    }
    std::vector<double> noise_scale(const std::vector<double>& residual) const override {
        std::vector<double> out(residual.size(), 0.0);
        for (int j = 0; j < design_->n_cells_; ++j) {
            const auto& idx = design_->rows_[size_t(j)];
            if (idx.empty()) continue;
            Eigen::VectorXd r(long(idx.size()));
            for (size_t k = 0; k < idx.size(); ++k) r[long(k)] = residual[size_t(idx[k])];
            const Eigen::VectorXd s = design_->blocks_[size_t(j)].hc0(r);
            for (size_t k = 0; k < idx.size(); ++k) out[size_t(idx[k])] = s[long(k)];
        }
        return out;
    }
    int n_coefficients() const override {
        int p = 0;
        for (const auto& b : design_->blocks_) p += b.rank;
        return p;
    }
    std::vector<double> coefficients() const override {
        std::vector<double> out;
        for (const auto& c : coef_)
            for (Eigen::Index i = 0; i < c.size(); ++i) out.push_back(c[i]);
        return out;
    }

  private:
    const CellpolyDesign* design_;
    std::vector<double> fitted_;
    std::vector<Eigen::VectorXd> coef_;
    std::array<double, 2> fit_range_{};
};

std::unique_ptr<Fit> CellpolyDesign::fit(const std::vector<double>& targets) const {
    return std::make_unique<CellpolyFit>(this, targets);
}

}  // namespace

std::unique_ptr<Design> build_design(const FeatureTable& features, const BasisSpec& basis) {
    if (features.n_rows <= 0 || features.n_cols() == 0)
        throw std::invalid_argument("empty feature table");
    for (const auto& col : features.columns)
        if (int(col.size()) != features.n_rows)
            throw std::invalid_argument("ragged feature table");
    switch (basis.kind) {
        case BasisKind::polynomial: return std::make_unique<PolynomialDesign>(features, basis);
        case BasisKind::partition: return std::make_unique<PartitionDesign>(features, basis);
        case BasisKind::cellpoly: return std::make_unique<CellpolyDesign>(features, basis);
    }
    throw std::invalid_argument("unknown basis kind");
}

FitPredictResult fit_predict(const FeatureTable& features, const std::vector<double>& targets,
                             const BasisSpec& basis) {
    if (int(targets.size()) != features.n_rows)
        throw std::invalid_argument("targets/features size mismatch");
    for (double t : targets)
        if (!std::isfinite(t)) throw std::invalid_argument("non-finite target");
    const auto design = build_design(features, basis);
    const auto fit = design->fit(targets);
    return {fit->fitted(), fit->coefficients()};
}

}  // namespace rcbsde
