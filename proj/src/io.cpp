#include "hypoql/io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hypoql {

namespace {

std::vector<double> vec_to_std(const VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

std::vector<double> mat_row_major(const MatrixXd& m) {
    std::vector<double> out;
    out.reserve(static_cast<size_t>(m.size()));
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
    return out;
}

void require_stream(const std::ofstream& os, const std::string& path) {
    if (!os) throw Error("cannot open for writing: " + path);
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_observations_csv(const ObservationGrid& grid, const std::string& path) {
    std::ofstream os(path);
    require_stream(os, path);
    os << "t";
    for (int i = 1; i <= grid.dims.dx; ++i) os << ",x" << i;
    for (int i = 1; i <= grid.dims.dy; ++i) os << ",y" << i;
    os << "\n";
    for (long j = 0; j <= grid.n(); ++j) {
        os << format_double(static_cast<double>(j) * grid.h);
        for (int i = 0; i < grid.dims.dz(); ++i) os << "," << format_double(grid.states(i, j));
        os << "\n";
    }
}

ObservationGrid load_observations(const std::string& path, const Dimensions& dims) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open: " + path, 0);

    std::string line;
    long line_no = 0;
    if (!std::getline(is, line)) throw FormatError("empty file: " + path, 0);
    ++line_no;

    // header sanity: t plus dz columns
    {
        std::stringstream ss(line);
        std::string cell;
        long cols = 0;
        while (std::getline(ss, cell, ',')) ++cols;
        if (cols != dims.dz() + 1) {
            throw FormatError("expected " + std::to_string(dims.dz() + 1) + " columns, found " +
                                  std::to_string(cols),
                              line_no);
        }
    }

    std::vector<double> times;
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw FormatError("unparseable number '" + cell + "'", line_no);
            }
        }
        if (row.size() != static_cast<size_t>(dims.dz() + 1)) {
            throw FormatError("wrong column count", line_no);
        }
        times.push_back(row[0]);
        row.erase(row.begin());
        rows.push_back(std::move(row));
    }
    if (rows.size() < 3) throw FormatError("need at least 3 observation rows", line_no);

    const double h = times[1] - times[0];
    if (!(h > 0.0)) throw NonEquidistantError(1);
    for (size_t j = 1; j < times.size(); ++j) {
        const double dt = times[j] - times[j - 1];
        if (std::abs(dt - h) > 1e-9 * h) {
            throw NonEquidistantError(static_cast<long>(j));
        }
    }

    ObservationGrid grid;
    grid.h = h;
    grid.dims = dims;
    grid.states.resize(dims.dz(), static_cast<long>(rows.size()));
    for (size_t j = 0; j < rows.size(); ++j) {
        for (int i = 0; i < dims.dz(); ++i) grid.states(i, static_cast<long>(j)) = rows[j][i];
    }
    return grid;
}

nlohmann::json information_to_json(const InformationMatrices& gamma) {
    nlohmann::json j;
    j["gamma11"] = mat_row_major(gamma.gamma11);
    j["gamma22"] = mat_row_major(gamma.gamma22);
    j["gamma33"] = mat_row_major(gamma.gamma33);
    j["gamma1_xonly"] = mat_row_major(gamma.gamma1_xonly);
    j["dims"] = {{"p1", gamma.gamma11.rows()},
                 {"p2", gamma.gamma22.rows()},
                 {"p3", gamma.gamma33.rows()}};
    j["failures"] = gamma.failures;
    return j;
}

nlohmann::json report_to_json(const EstimateReport& rep) {
    nlohmann::json j;
    j["method"] = method_name(rep.method);
    j["n"] = rep.n;
    j["h"] = rep.h;
    j["theta1"] = vec_to_std(rep.theta_hat.theta1);
    j["theta2"] = vec_to_std(rep.theta_hat.theta2);
    j["theta3"] = vec_to_std(rep.theta_hat.theta3);
    if (rep.theta_initial.theta1.size()) {
        j["theta1_initial"] = vec_to_std(rep.theta_initial.theta1);
        j["theta2_initial"] = vec_to_std(rep.theta_initial.theta2);
        j["theta3_initial"] = vec_to_std(rep.theta_initial.theta3);
    }
    j["onestep_event_ok"] = rep.onestep_event_ok;
    j["gamma"] = information_to_json(rep.gamma);
    j["rate_scales"] = {{"theta1", rep.rate1}, {"theta2", rep.rate2}, {"theta3", rep.rate3}};
    j["stderr_theta1"] = vec_to_std(rep.stderr1);
    j["stderr_theta2"] = vec_to_std(rep.stderr2);
    j["stderr_theta3"] = vec_to_std(rep.stderr3);
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& st : rep.stages) {
        stages.push_back({{"stage", st.stage},
                          {"iters", st.diag.iters},
                          {"grad_norm", st.diag.final_grad_norm},
                          {"value", st.diag.final_value},
                          {"converged", st.diag.converged},
                          {"on_boundary", st.diag.on_boundary},
                          {"winning_start", st.diag.winning_start}});
    }
    j["stages"] = stages;
    return j;
}

nlohmann::json summary_to_json(const McResult& result) {
    nlohmann::json j;
    j["model"] = result.cfg.model;
    j["replications"] = result.cfg.replications;
    j["master_seed"] = result.cfg.master_seed;
    j["failed_replications"] = result.summary.failed_replications;

    nlohmann::json coords = nlohmann::json::array();
    for (const auto& c : result.summary.coords) {
        coords.push_back({{"estimator", c.estimator},
                          {"n", c.n},
                          {"h", c.h},
                          {"block", c.block},
                          {"coord", c.coord},
                          {"mean_error", c.mean_error},
                          {"scaled_mean", c.scaled_mean},
                          {"scaled_var", c.scaled_var},
                          {"target_var", c.target_var},
                          {"coverage95", c.coverage95},
                          {"successes", c.successes},
                          {"failures", c.failures}});
    }
    j["coords"] = coords;

    nlohmann::json rmse = nlohmann::json::array();
    for (const auto& r : result.summary.rmse) {
        rmse.push_back({{"estimator", r.estimator},
                        {"n", r.n},
                        {"h", r.h},
                        {"block", r.block},
                        {"rmse_trimmed", r.rmse_trimmed},
                        {"rmse_raw", r.rmse_raw}});
    }
    j["rmse"] = rmse;

    nlohmann::json slopes = nlohmann::json::array();
    for (const auto& s : result.summary.slopes) {
        slopes.push_back({{"estimator", s.estimator}, {"block", s.block}, {"slope", s.slope}});
    }
    j["slopes"] = slopes;
    return j;
}

void write_json(const nlohmann::json& doc, const std::string& path) {
    std::ofstream os(path);
    require_stream(os, path);
    os << doc.dump(2) << "\n";
}

void write_mc_raw_csv(const McResult& result, const std::string& path) {
    std::ofstream os(path);
    require_stream(os, path);
    os << "rep,n,h,estimator,block,coord,error,scaled_error,ok_flag\n";
    auto emit = [&](const RepRecord& r, int block, const VectorXd& err, const VectorXd& scaled) {
        for (int c = 0; c < err.size(); ++c) {
            os << r.rep << "," << r.n << "," << format_double(r.h) << "," << r.estimator << ","
               << block << "," << c << "," << format_double(err[c]) << ","
               << format_double(scaled[c]) << "," << (r.ok ? 1 : 0) << "\n";
        }
    };
    for (const auto& r : result.records) {
        emit(r, 1, r.err1, r.scaled1);
        emit(r, 2, r.err2, r.scaled2);
        emit(r, 3, r.err3, r.scaled3);
    }
}

void write_mc_qq_csv(const McResult& result, const std::string& path) {
    std::ofstream os(path);
    require_stream(os, path);
    os << "estimator,block,coord,idx,studentized,normal_quantile\n";
    for (const auto& row : qq_data(result)) {
        os << row.estimator << "," << row.block << "," << row.coord << "," << row.idx << ","
           << format_double(row.studentized) << "," << format_double(row.normal_quantile) << "\n";
    }
}

void write_ident_csv(const std::vector<IdentCurve>& curves, const std::string& path) {
    std::ofstream os(path);
    require_stream(os, path);
    os << "block,coord,truth,chi_hat,param_value,field_value\n";
    for (const auto& c : curves) {
        for (const auto& pt : c.points) {
            os << c.block << "," << c.coord << "," << format_double(c.truth) << ","
               << format_double(c.chi_hat) << "," << format_double(pt.param_value) << ","
               << format_double(pt.field_value) << "\n";
        }
    }
}

void write_contrast_trace_csv(const std::vector<std::pair<long, double>>& trace,
                              const std::string& path) {
    std::ofstream os(path);
    require_stream(os, path);
    os << "j,value\n";
    for (const auto& [j, v] : trace) os << j << "," << format_double(v) << "\n";
}

}  // namespace hypoql
