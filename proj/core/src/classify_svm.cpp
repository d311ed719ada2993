#include <algorithm>
#include <cmath>
#include <vector>

#include "hemisym/classify.hpp"

namespace hemisym {

void Dataset::add(std::string id, const FeatureArray& x, int label) {
    if (label != 0 && label != 1) throw InputError("dataset labels must be 0 or 1");
    for (double v : x)
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw InputError("dataset feature entries must be finite and within [0,1]");
    ids.push_back(std::move(id));
    features.push_back(x);
    labels.push_back(label);
}

void Dataset::validate_for_training() const {
    if (features.size() != labels.size() || features.size() != ids.size())
        throw InputError("dataset columns have mismatched lengths");
    const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
    const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
    if (!has_pos || !has_neg)
        throw InputError("training requires at least one row of each class");
}

Dataset Dataset::from_rows(const std::vector<FeatureRow>& rows) {
    Dataset d;
    for (const FeatureRow& r : rows) {
        if (!r.label) throw InputError("dataset row '" + r.id + "' has no label");
        d.add(r.id, r.fv.values(), *r.label);
    }
    return d;
}

namespace {

double rbf(const FeatureArray& a, const FeatureArray& b, double gamma) {
    double d2 = 0.0;
    for (int i = 0; i < kNumFeatures; ++i) {
        const double d = a[i] - b[i];
        d2 += d * d;
    }
    return std::exp(-gamma * d2);
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Platt's sequential minimal optimization over the soft-margin dual.
// Deterministic: the fallback loops scan in a fixed order instead of from a
// random start.
class SmoSolver {
public:
    SmoSolver(const std::vector<FeatureArray>& xs, const std::vector<double>& ys,
              double c, double gamma, double tol)
        : xs_(xs), ys_(ys), n_(static_cast<int>(xs.size())), c_(c), gamma_(gamma), tol_(tol),
          alpha_(n_, 0.0), errors_(n_), kernel_(static_cast<size_t>(n_) * n_, -1.0) {
        for (int i = 0; i < n_; ++i) errors_[i] = -ys_[i]; // f = 0 initially
    }

    void solve() {
        int changed = 0;
        bool examine_all = true;
        int sweeps = 0;
        const int max_sweeps = 2000;
        while ((changed > 0 || examine_all) && sweeps++ < max_sweeps) {
            changed = 0;
            for (int i = 0; i < n_; ++i) {
                if (!examine_all && (alpha_[i] <= 0.0 || alpha_[i] >= c_)) continue;
                changed += examine(i);
            }
            if (examine_all) examine_all = false;
            else if (changed == 0) examine_all = true;
        }
    }

    const std::vector<double>& alpha() const { return alpha_; }

    double recover_bias() const {
        // Average y - s(x) over free support vectors; fall back to the
        // midpoint of the feasible interval when none exist.
        double acc = 0.0;
        int free_count = 0;
        for (int i = 0; i < n_; ++i)
            if (alpha_[i] > 1e-12 && alpha_[i] < c_ - 1e-12) {
                acc += ys_[i] - margin_sum(i);
                ++free_count;
            }
        if (free_count > 0) return acc / free_count;

        double lo = -1e300, hi = 1e300;
        for (int i = 0; i < n_; ++i) {
            const double g = ys_[i] - margin_sum(i);
            const bool upper_ok = (ys_[i] > 0 && alpha_[i] < c_ - 1e-12) ||
                                  (ys_[i] < 0 && alpha_[i] > 1e-12);
            const bool lower_ok = (ys_[i] > 0 && alpha_[i] > 1e-12) ||
                                  (ys_[i] < 0 && alpha_[i] < c_ - 1e-12);
            if (upper_ok) hi = std::min(hi, g);
            if (lower_ok) lo = std::max(lo, g);
        }
        if (lo > hi) std::swap(lo, hi);
        return 0.5 * (lo + hi);
    }

private:
    double kernel(int i, int j) {
        double& k = kernel_[static_cast<size_t>(i) * n_ + j];
        if (k < 0.0) {
            k = rbf(xs_[i], xs_[j], gamma_);
            kernel_[static_cast<size_t>(j) * n_ + i] = k;
        }
        return k;
    }

    double margin_sum(int i) const {
        double s = 0.0;
        for (int j = 0; j < n_; ++j)
            if (alpha_[j] > 0.0)
                s += alpha_[j] * ys_[j] * rbf(xs_[j], xs_[i], gamma_);
        return s;
    }

    int examine(int i2) {
        const double r2 = errors_[i2] * ys_[i2];
        if (!((r2 < -tol_ && alpha_[i2] < c_) || (r2 > tol_ && alpha_[i2] > 0.0))) return 0;

        // Heuristic 1: pick the partner maximizing |E1 - E2| among free alphas.
        int best = -1;
        double best_gap = -1.0;
        for (int i = 0; i < n_; ++i) {
            if (i == i2 || alpha_[i] <= 0.0 || alpha_[i] >= c_) continue;
            const double gap = std::abs(errors_[i] - errors_[i2]);
            if (gap > best_gap) {
                best_gap = gap;
                best = i;
            }
        }
        if (best >= 0 && take_step(best, i2)) return 1;

        // Heuristic 2: any free alpha, fixed scan order.
        for (int i = 0; i < n_; ++i) {
            if (i == i2 || alpha_[i] <= 0.0 || alpha_[i] >= c_) continue;
            if (take_step(i, i2)) return 1;
        }
        // Heuristic 3: the whole set.
        for (int i = 0; i < n_; ++i) {
            if (i == i2) continue;
            if (take_step(i, i2)) return 1;
        }
        return 0;
    }

    bool take_step(int i1, int i2) {
        if (i1 == i2) return false;
        const double a1 = alpha_[i1], a2 = alpha_[i2];
        const double y1 = ys_[i1], y2 = ys_[i2];
        const double s = y1 * y2;

        double lo, hi;
        if (s < 0.0) {
            lo = std::max(0.0, a2 - a1);
            hi = std::min(c_, c_ + a2 - a1);
        } else {
            lo = std::max(0.0, a1 + a2 - c_);
            hi = std::min(c_, a1 + a2);
        }
        if (lo >= hi) return false;

        const double k11 = kernel(i1, i1), k22 = kernel(i2, i2), k12 = kernel(i1, i2);
        const double eta = 2.0 * k12 - k11 - k22;
        if (eta >= 0.0) return false; // duplicate points under an RBF kernel

        double a2n = a2 - y2 * (errors_[i1] - errors_[i2]) / eta;
        a2n = std::clamp(a2n, lo, hi);
        if (a2n < 1e-12) a2n = 0.0;
        else if (a2n > c_ - 1e-12) a2n = c_;
        if (std::abs(a2n - a2) < 1e-14 * (a2n + a2 + 1e-14)) return false;

        double a1n = a1 + s * (a2 - a2n);
        if (a1n < 1e-12) a1n = 0.0;
        else if (a1n > c_ - 1e-12) a1n = c_;

        // Bias update keeping f(x) = s(x) + b consistent.
        const double b1 = bias_ - errors_[i1] - y1 * (a1n - a1) * k11 - y2 * (a2n - a2) * k12;
        const double b2 = bias_ - errors_[i2] - y1 * (a1n - a1) * k12 - y2 * (a2n - a2) * k22;
        double bn;
        const bool f1 = a1n > 0.0 && a1n < c_;
        const bool f2 = a2n > 0.0 && a2n < c_;
        if (f1) bn = b1;
        else if (f2) bn = b2;
        else bn = 0.5 * (b1 + b2);

        for (int k = 0; k < n_; ++k)
            errors_[k] += y1 * (a1n - a1) * kernel(i1, k) + y2 * (a2n - a2) * kernel(i2, k) +
                          (bn - bias_);
        alpha_[i1] = a1n;
        alpha_[i2] = a2n;
        bias_ = bn;
        return true;
    }

    const std::vector<FeatureArray>& xs_;
    const std::vector<double>& ys_;
    int n_;
    double c_, gamma_, tol_;
    double bias_ = 0.0;
    std::vector<double> alpha_;
    std::vector<double> errors_;
    std::vector<double> kernel_;
};

} // namespace

double SvmModel::decision(const FeatureArray& x) const {
    double s = bias;
    for (std::size_t i = 0; i < support_vectors.size(); ++i)
        s += dual_coef[i] * rbf(support_vectors[i], x, gamma);
    return s;
}

double SvmModel::score(const FeatureArray& x) const { return logistic(decision(x)); }

SvmModel train_svm(const Dataset& data, double c, double gamma, double tol) {
    data.validate_for_training();
    if (!(c > 0.0)) throw InputError("train_svm: C must be positive");
    if (!(gamma > 0.0)) throw InputError("train_svm: gamma must be positive");
    if (!(tol > 0.0)) throw InputError("train_svm: tol must be positive");

    std::vector<double> ys(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) ys[i] = data.labels[i] == 1 ? 1.0 : -1.0;

    SmoSolver solver(data.features, ys, c, gamma, tol);
    solver.solve();

    SvmModel model;
    model.c = c;
    model.gamma = gamma;
    model.bias = solver.recover_bias();
    const std::vector<double>& alpha = solver.alpha();
    for (std::size_t i = 0; i < data.size(); ++i)
        if (alpha[i] > 1e-12) {
            model.support_vectors.push_back(data.features[i]);
            model.dual_coef.push_back(alpha[i] * ys[i]);
        }
    return model;
}

} // namespace hemisym
