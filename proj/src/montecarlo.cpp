#include "hypoql/montecarlo.hpp"

#include "hypoql/models.hpp"
#include "hypoql/rng.hpp"
#include "hypoql/simulate.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

namespace hypoql {

namespace {

constexpr double kZ95 = 1.959963984540054;

VectorXd nan_vec(int p) {
    return VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
}

RepRecord empty_record(int rep, const SchedulePoint& sp, const std::string& label,
                       const Dimensions& d) {
    RepRecord r;
    r.rep = rep;
    r.n = sp.n;
    r.h = sp.h;
    r.estimator = label;
    r.ok = false;
    r.err1 = nan_vec(d.p1);
    r.err2 = nan_vec(d.p2);
    r.err3 = nan_vec(d.p3);
    r.scaled1 = nan_vec(d.p1);
    r.scaled2 = nan_vec(d.p2);
    r.scaled3 = nan_vec(d.p3);
    r.se1 = nan_vec(d.p1);
    r.se2 = nan_vec(d.p2);
    r.se3 = nan_vec(d.p3);
    r.tvar1 = nan_vec(d.p1);
    r.tvar2 = nan_vec(d.p2);
    r.tvar3 = nan_vec(d.p3);
    return r;
}

RepRecord record_from_report(int rep, const SchedulePoint& sp, const std::string& label,
                             const ThetaPoint& theta_star, const ThetaPoint& theta_hat,
                             const EstimateReport& rep_report, const VectorXd& se1_override) {
    RepRecord r;
    r.rep = rep;
    r.n = sp.n;
    r.h = sp.h;
    r.estimator = label;
    r.ok = true;
    r.onestep_ok = rep_report.onestep_event_ok;
    r.err1 = theta_hat.theta1 - theta_star.theta1;
    r.err2 = theta_hat.theta2 - theta_star.theta2;
    r.err3 = theta_hat.theta3 - theta_star.theta3;
    r.scaled1 = rep_report.rate1 * r.err1;
    r.scaled2 = rep_report.rate2 * r.err2;
    r.scaled3 = rep_report.rate3 * r.err3;
    r.se1 = se1_override.size() ? se1_override : rep_report.stderr1;
    r.se2 = rep_report.stderr2;
    r.se3 = rep_report.stderr3;
    r.tvar1 = (rep_report.rate1 * r.se1).array().square();
    r.tvar2 = (rep_report.rate2 * r.se2).array().square();
    r.tvar3 = (rep_report.rate3 * r.se3).array().square();
    return r;
}

struct GroupKey {
    std::string estimator;
    long n;
    double h;
    int block;
    bool operator<(const GroupKey& o) const {
        return std::tie(estimator, n, h, block) < std::tie(o.estimator, o.n, o.h, o.block);
    }
};

double sample_variance(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(xs.size() - 1);
}

McSummary summarize(const McConfig& cfg, const std::vector<RepRecord>& records) {
    McSummary out;
    out.replications = cfg.replications;

    struct CoordBucket {
        std::vector<double> err, scaled, tvar;
        long covered = 0, successes = 0, failures = 0;
    };
    std::map<std::tuple<std::string, long, double, int, int>, CoordBucket> coord_buckets;
    std::map<GroupKey, std::vector<double>> sq_norms;  // per-rep squared block errors

    auto visit_block = [&](const RepRecord& r, int block, const VectorXd& err,
                           const VectorXd& scaled, const VectorXd& se, const VectorXd& tvar) {
        double sq = 0.0;
        for (int c = 0; c < err.size(); ++c) {
            auto& b = coord_buckets[{r.estimator, r.n, r.h, block, c}];
            if (r.ok) {
                b.err.push_back(err[c]);
                b.scaled.push_back(scaled[c]);
                b.tvar.push_back(tvar[c]);
                if (std::abs(err[c]) <= kZ95 * se[c]) ++b.covered;
                ++b.successes;
            } else {
                ++b.failures;
            }
        }
        if (r.ok) {
            sq = err.squaredNorm();
            sq_norms[GroupKey{r.estimator, r.n, r.h, block}].push_back(sq);
        }
    };

    for (const auto& r : records) {
        visit_block(r, 1, r.err1, r.scaled1, r.se1, r.tvar1);
        visit_block(r, 2, r.err2, r.scaled2, r.se2, r.tvar2);
        visit_block(r, 3, r.err3, r.scaled3, r.se3, r.tvar3);
    }

    for (const auto& [key, b] : coord_buckets) {
        CoordSummary cs;
        std::tie(cs.estimator, cs.n, cs.h, cs.block, cs.coord) = key;
        cs.successes = b.successes;
        cs.failures = b.failures;
        if (!b.err.empty()) {
            const double m = static_cast<double>(b.err.size());
            cs.mean_error = std::accumulate(b.err.begin(), b.err.end(), 0.0) / m;
            cs.scaled_mean = std::accumulate(b.scaled.begin(), b.scaled.end(), 0.0) / m;
            cs.scaled_var = sample_variance(b.scaled, cs.scaled_mean);
            cs.target_var = std::accumulate(b.tvar.begin(), b.tvar.end(), 0.0) / m;
            cs.coverage95 = static_cast<double>(b.covered) / m;
        }
        out.coords.push_back(cs);
    }

    for (auto& [key, sq] : sq_norms) {
        BlockRmse br;
        br.estimator = key.estimator;
        br.n = key.n;
        br.h = key.h;
        br.block = key.block;
        const double m = static_cast<double>(sq.size());
        br.rmse_raw = std::sqrt(std::accumulate(sq.begin(), sq.end(), 0.0) / m);
        std::sort(sq.begin(), sq.end());
        const size_t keep = sq.size() - static_cast<size_t>(std::floor(0.02 * m));
        double acc = 0.0;
        for (size_t i = 0; i < keep; ++i) acc += sq[i];
        br.rmse_trimmed = std::sqrt(acc / static_cast<double>(keep));
        out.rmse.push_back(br);
    }

    // log-RMSE slope against log n per (estimator, block)
    std::map<std::pair<std::string, int>, std::vector<std::pair<double, double>>> fits;
    for (const auto& br : out.rmse) {
        if (br.rmse_trimmed > 0.0) {
            fits[{br.estimator, br.block}].push_back(
                {std::log(static_cast<double>(br.n)), std::log(br.rmse_trimmed)});
        }
    }
    for (const auto& [key, pts] : fits) {
        if (pts.size() < 3) continue;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (auto [x, y] : pts) {
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double m = static_cast<double>(pts.size());
        SlopeFit fit;
        fit.estimator = key.first;
        fit.block = key.second;
        fit.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        out.slopes.push_back(fit);
    }

    std::set<std::pair<long, int>> failed;
    for (const auto& r : records) {
        if (!r.ok) failed.insert({r.n, r.rep});
    }
    out.failed_replications = static_cast<long>(failed.size());
    return out;
}

}  // namespace

std::vector<SchedulePoint> schedule_from_rule(const std::vector<long>& n_list, double c,
                                              double alpha) {
    if (!(c > 0.0) || !(alpha > 0.5) || !(alpha < 1.0)) {
        throw std::invalid_argument("step rule needs c > 0 and alpha in (0.5, 1)");
    }
    std::vector<SchedulePoint> out;
    for (long n : n_list) {
        out.push_back({n, c * std::pow(static_cast<double>(n), -alpha)});
    }
    return out;
}

void McConfig::validate() const {
    if (replications < 1) throw std::invalid_argument("mc: replications must be >= 1");
    if (schedule.empty()) throw std::invalid_argument("mc: empty schedule");
    if (estimators.empty()) throw std::invalid_argument("mc: empty estimator set");
    for (const auto& sp : schedule) {
        if (sp.n < 2 || !(sp.h > 0.0)) throw std::invalid_argument("mc: bad schedule point");
        const double nh = static_cast<double>(sp.n) * sp.h;
        const double nh2 = nh * sp.h;
        if (nh < 10.0 || nh2 > 1.0) {
            std::cerr << "[mc] warning: schedule point n=" << sp.n << " h=" << sp.h
                      << " has nh=" << nh << ", nh^2=" << nh2
                      << " (asymptotics expect nh >= 10 and nh^2 <= 1)\n";
        }
    }
}

McResult run_replications(const McConfig& cfg) {
    cfg.validate();
    auto model = make_model(cfg.model);
    const auto& d = model->dims();
    const ThetaPoint theta_star =
        cfg.theta_true.has_value() ? *cfg.theta_true : default_truth_for(cfg.model);
    if (!theta_star.in_closure(model->boxes())) {
        throw std::invalid_argument("mc: theta_true outside the model parameter box");
    }

    const bool want_initial =
        std::count(cfg.estimators.begin(), cfg.estimators.end(), EstimateMethod::initial_only) > 0;
    const bool want_adaptive =
        std::count(cfg.estimators.begin(), cfg.estimators.end(), EstimateMethod::adaptive) > 0;
    const bool want_joint =
        std::count(cfg.estimators.begin(), cfg.estimators.end(), EstimateMethod::joint) > 0;
    const bool want_inferior =
        std::count(cfg.estimators.begin(), cfg.estimators.end(),
                   EstimateMethod::inferior_theta3) > 0;

    McResult result;
    result.cfg = cfg;

    const int workers = cfg.workers > 0 ? cfg.workers : omp_get_max_threads();

    for (const auto& sp : cfg.schedule) {
        std::vector<std::vector<RepRecord>> slots(static_cast<size_t>(cfg.replications));

#pragma omp parallel for schedule(dynamic) num_threads(workers)
        for (int rep = 0; rep < cfg.replications; ++rep) {
            auto& recs = slots[static_cast<size_t>(rep)];
            try {
                SimConfig sim;
                sim.n = sp.n;
                sim.h = sp.h;
                sim.substeps = cfg.substeps;
                sim.burn_in = cfg.burn_in;
                sim.z0 = cfg.z0;
                sim.seed = cfg.master_seed;
                sim.stream = static_cast<uint64_t>(rep);
                const ObservationGrid grid = simulate_path(*model, theta_star, sim);

                std::optional<EstimateReport> adaptive;
                if (want_adaptive || want_initial || want_joint) {
                    if (want_adaptive || want_joint) {
                        adaptive = estimate_adaptive(*model, grid, cfg.est);
                    } else {
                        adaptive = estimate_initial_only(*model, grid, cfg.est);
                    }
                }
                if (want_initial || want_adaptive) {
                    // pipeline initials; theta1 stderr from the X-only information
                    VectorXd se1 = VectorXd::Zero(d.p1);
                    {
                        Eigen::FullPivLU<MatrixXd> lu(adaptive->gamma.gamma1_xonly);
                        const MatrixXd inv = lu.inverse();
                        for (int i = 0; i < d.p1; ++i) {
                            se1[i] = std::sqrt(std::max(inv(i, i), 0.0)) / adaptive->rate1;
                        }
                    }
                    recs.push_back(record_from_report(rep, sp, "initial", theta_star,
                                                      adaptive->theta_initial, *adaptive, se1));
                }
                if (want_adaptive) {
                    recs.push_back(record_from_report(rep, sp, "adaptive", theta_star,
                                                      adaptive->theta_hat, *adaptive, {}));
                }
                if (want_joint) {
                    const EstimateReport jr = estimate_joint(
                        *model, grid, cfg.est,
                        adaptive ? std::optional<ThetaPoint>(adaptive->theta_hat) : std::nullopt);
                    recs.push_back(
                        record_from_report(rep, sp, "joint", theta_star, jr.theta_hat, jr, {}));
                }
                if (want_inferior) {
                    const EstimateReport ir = estimate_inferior_theta3(*model, grid, cfg.est);
                    recs.push_back(record_from_report(rep, sp, "inferior_theta3", theta_star,
                                                      ir.theta_hat, ir, {}));
                }
            } catch (const std::exception&) {
                recs.clear();
                if (want_initial || want_adaptive) {
                    recs.push_back(empty_record(rep, sp, "initial", d));
                }
                if (want_adaptive) recs.push_back(empty_record(rep, sp, "adaptive", d));
                if (want_joint) recs.push_back(empty_record(rep, sp, "joint", d));
                if (want_inferior) recs.push_back(empty_record(rep, sp, "inferior_theta3", d));
            }
        }

        long failed = 0;
        for (auto& recs : slots) {
            bool rep_failed = !recs.empty() && !recs.front().ok;
            if (rep_failed) ++failed;
            for (auto& r : recs) result.records.push_back(std::move(r));
        }
        if (static_cast<double>(failed) >
            cfg.abort_failure_fraction * static_cast<double>(cfg.replications)) {
            throw Error("mc: " + std::to_string(failed) + " of " +
                        std::to_string(cfg.replications) + " replications failed at n=" +
                        std::to_string(sp.n));
        }
    }

    result.summary = summarize(cfg, result.records);
    return result;
}

RatioReport variance_ratio_experiment(const McResult& result, uint64_t bootstrap_seed) {
    RatioReport out;

    // collect paired per-replication values at the first schedule point
    const long n0 = result.cfg.schedule.front().n;
    std::map<int, const RepRecord*> adaptive, inferior, initial;
    for (const auto& r : result.records) {
        if (r.n != n0 || !r.ok) continue;
        if (r.estimator == "adaptive") adaptive[r.rep] = &r;
        if (r.estimator == "inferior_theta3") inferior[r.rep] = &r;
        if (r.estimator == "initial") initial[r.rep] = &r;
    }

    auto paired_ratio = [&](const std::map<int, const RepRecord*>& num,
                            const std::map<int, const RepRecord*>& den, int block, long& pairs,
                            double& ratio, double& lo, double& hi) {
        std::vector<std::pair<VectorXd, VectorXd>> rows;  // paired per-rep scaled errors
        for (const auto& [rep, rn] : num) {
            auto it = den.find(rep);
            if (it == den.end()) continue;
            const VectorXd& va = block == 3 ? rn->scaled3 : rn->scaled1;
            const VectorXd& vb = block == 3 ? it->second->scaled3 : it->second->scaled1;
            rows.push_back({va, vb});
        }
        pairs = static_cast<long>(rows.size());
        if (rows.size() < 3) {
            ratio = lo = hi = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        auto var_of = [&](const std::vector<size_t>& idx, bool numerator) {
            // total variance across coordinates of the block
            const int p = static_cast<int>(rows.front().first.size());
            double total = 0.0;
            for (int c = 0; c < p; ++c) {
                double mean = 0.0;
                for (size_t i : idx) {
                    mean += (numerator ? rows[i].first[c] : rows[i].second[c]);
                }
                mean /= static_cast<double>(idx.size());
                double acc = 0.0;
                for (size_t i : idx) {
                    const double v = (numerator ? rows[i].first[c] : rows[i].second[c]) - mean;
                    acc += v * v;
                }
                total += acc / static_cast<double>(idx.size() - 1);
            }
            return total;
        };

        std::vector<size_t> all(rows.size());
        std::iota(all.begin(), all.end(), size_t{0});
        ratio = var_of(all, true) / var_of(all, false);

        CounterRng rng(bootstrap_seed, 1);
        std::vector<double> boot;
        std::vector<size_t> idx(rows.size());
        for (int b2 = 0; b2 < out.bootstrap_resamples; ++b2) {
            for (auto& i : idx) {
                i = static_cast<size_t>(rng.uniform() * static_cast<double>(rows.size()));
                if (i >= rows.size()) i = rows.size() - 1;
            }
            const double dv = var_of(idx, false);
            if (dv > 0.0) boot.push_back(var_of(idx, true) / dv);
        }
        std::sort(boot.begin(), boot.end());
        lo = boot[static_cast<size_t>(0.025 * static_cast<double>(boot.size()))];
        hi = boot[std::min(boot.size() - 1,
                           static_cast<size_t>(0.975 * static_cast<double>(boot.size())))];
    };

    paired_ratio(inferior, adaptive, 3, out.pairs3, out.theta3_ratio, out.theta3_lo,
                 out.theta3_hi);
    paired_ratio(adaptive, initial, 1, out.pairs1, out.theta1_ratio, out.theta1_lo, out.theta1_hi);
    return out;
}

std::vector<QqRow> qq_data(const McResult& result) {
    std::map<std::tuple<std::string, int, int>, std::vector<double>> buckets;
    for (const auto& r : result.records) {
        if (!r.ok) continue;
        auto push = [&](int block, const VectorXd& err, const VectorXd& se) {
            for (int c = 0; c < err.size(); ++c) {
                if (se[c] > 0.0) buckets[{r.estimator, block, c}].push_back(err[c] / se[c]);
            }
        };
        push(1, r.err1, r.se1);
        push(2, r.err2, r.se2);
        push(3, r.err3, r.se3);
    }
    std::vector<QqRow> rows;
    for (auto& [key, vals] : buckets) {
        std::sort(vals.begin(), vals.end());
        const double m = static_cast<double>(vals.size());
        for (size_t i = 0; i < vals.size(); ++i) {
            QqRow row;
            std::tie(row.estimator, row.block, row.coord) = key;
            row.idx = static_cast<long>(i);
            row.studentized = vals[i];
            row.normal_quantile = normal_quantile((static_cast<double>(i) + 0.5) / m);
            rows.push_back(row);
        }
    }
    return rows;
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) return std::numeric_limits<double>::quiet_NaN();
    // Acklam's rational approximation with one Halley refinement
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    } else if (p > 1.0 - plow) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    } else {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    // Halley step against the exact CDF
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

}  // namespace hypoql
