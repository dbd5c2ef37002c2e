#include "lpvdd/inner_synth.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace lpvdd {

namespace {

constexpr double kConditionWarning = 1e12;

void warn_if_ill_conditioned(const Eigen::LLT<Eigen::MatrixXd>& llt, const char* what) {
    const Eigen::VectorXd d = llt.matrixLLT().diagonal().cwiseAbs();
    if (d.size() == 0) return;
    const double lo = d.minCoeff();
    const double ratio = lo > 0.0 ? std::pow(d.maxCoeff() / lo, 2) : std::numeric_limits<double>::infinity();
    if (ratio > kConditionWarning) spdlog::warn("{}: condition estimate {:.3e} exceeds {:.0e}", what, ratio, kConditionWarning);
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        spdlog::warn("{}: Cholesky failed, falling back to LDLT", what);
        return m.ldlt().solve(rhs);
    }
    warn_if_ill_conditioned(llt, what);
    return llt.solve(rhs);
}

void check_gamma(double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("regularization gamma must be positive");
}

std::optional<double> lagged(const SampledSignal& s, std::size_t t, std::size_t lag) {
    if (lag > t) return std::nullopt;
    return s.at(t - lag);
}

struct StructuralRows {
    std::vector<std::size_t> index;
    std::vector<Eigen::VectorXd> terms;
    std::vector<Eigen::VectorXd> pis;
};

// Structural entries [-u(t-1..t-n_a), e_f(t..t-n_b)] and Pi(t) for every sample where all are available.
StructuralRows structural_rows(const ExperimentLog& log, const ControllerStructure& s, const LeftInverseFilter& inv) {
    const SampledSignal ef = prefilter_fixed_part(virtual_error(log.y(), log.p(), inv), s.fixed_part);
    StructuralRows out;
    const std::size_t n = log.size();
    for (std::size_t t = 0; t < n; ++t) {
        if (!log.u().available(t)) continue;
        Eigen::VectorXd terms(static_cast<Eigen::Index>(s.term_count()));
        bool ok = true;
        for (std::size_t i = 1; i <= s.n_a && ok; ++i) {
            const auto v = lagged(log.u(), t, i);
            ok = v.has_value();
            if (ok) terms(static_cast<Eigen::Index>(i - 1)) = -*v;
        }
        for (std::size_t j = 0; j <= s.n_b && ok; ++j) {
            const auto v = lagged(ef, t, j);
            ok = v.has_value();
            if (ok) terms(static_cast<Eigen::Index>(s.n_a + j)) = *v;
        }
        if (!ok) continue;
        auto pi = scheduling_vector(log.p(), t, s.scheduling_lags);
        if (!pi) continue;
        out.index.push_back(t);
        out.terms.push_back(std::move(terms));
        out.pis.push_back(std::move(*pi));
    }
    return out;
}

Eigen::RowVectorXd kron_row(const Eigen::VectorXd& terms, const Eigen::VectorXd& features) {
    Eigen::RowVectorXd row(terms.size() * features.size());
    for (Eigen::Index k = 0; k < terms.size(); ++k) {
        row.segment(k * features.size(), features.size()) = terms(k) * features.transpose();
    }
    return row;
}

std::size_t feature_count_for(const ControllerStructure& s, std::size_t centers) {
    if (const auto* p = std::get_if<ParametricCoefficients>(&s.coefficients)) return p->basis.size();
    return centers;
}

} // namespace

void ControllerStructure::validate() const {
    if (n_a == 0 && n_b == 0) throw std::invalid_argument("controller needs n_a > 0 or n_b > 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
    if (const auto* k = std::get_if<KernelCoefficients>(&coefficients)) {
        if (!(k->sigma > 0.0)) throw std::invalid_argument("kernel width sigma must be positive");
        if (k->center_stride == 0) throw std::invalid_argument("kernel center stride must be at least 1");
    } else {
        const auto& basis = std::get<ParametricCoefficients>(coefficients).basis;
        if (basis.empty()) throw std::invalid_argument("parametric coefficient basis is empty");
        for (const auto& f : basis) {
            if (f.required_size() > scheduling_lags.size()) {
                throw std::invalid_argument("basis function " + f.to_string() + " reads beyond Pi(t)");
            }
        }
    }
}

std::size_t ControllerStructure::max_scheduling_lag() const noexcept {
    return scheduling_lags.empty() ? 0 : *std::max_element(scheduling_lags.begin(), scheduling_lags.end());
}

SampledSignal prefilter_fixed_part(const SampledSignal& error, FixedPart fixed) {
    if (fixed == FixedPart::None) return error;
    std::vector<std::optional<double>> out(error.size());
    double acc = 0.0;
    for (std::size_t t = 0; t < error.size(); ++t) {
        if (!error.available(t)) continue;
        acc += error.value(t);
        out[t] = acc;
    }
    return SampledSignal(std::move(out), error.sample_period(), error.start_index());
}

std::optional<Eigen::VectorXd> scheduling_vector(const SampledSignal& p, std::size_t t,
                                                 const std::vector<std::size_t>& lags) {
    Eigen::VectorXd pi(static_cast<Eigen::Index>(lags.size()));
    for (std::size_t k = 0; k < lags.size(); ++k) {
        const auto v = lagged(p, t, lags[k]);
        if (!v) return std::nullopt;
        pi(static_cast<Eigen::Index>(k)) = *v;
    }
    return pi;
}

Eigen::VectorXd build_kernel_features(std::span<const Eigen::VectorXd> centers, const Eigen::VectorXd& query,
                                      double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("kernel width sigma must be positive");
    Eigen::VectorXd out(static_cast<Eigen::Index>(centers.size()));
    for (std::size_t j = 0; j < centers.size(); ++j) {
        if (centers[j].size() != query.size()) throw ShapeError("kernel center and query differ in dimension");
        out(static_cast<Eigen::Index>(j)) = std::exp(-(query - centers[j]).squaredNorm() / sigma);
    }
    return out;
}

Eigen::VectorXd coefficient_features(const ControllerStructure& structure, std::span<const Eigen::VectorXd> centers,
                                     const Eigen::VectorXd& pi) {
    if (const auto* k = std::get_if<KernelCoefficients>(&structure.coefficients)) {
        return build_kernel_features(centers, pi, k->sigma);
    }
    const auto& basis = std::get<ParametricCoefficients>(structure.coefficients).basis;
    Eigen::VectorXd out(static_cast<Eigen::Index>(basis.size()));
    const std::span<const double> view(pi.data(), static_cast<std::size_t>(pi.size()));
    for (std::size_t k = 0; k < basis.size(); ++k) out(static_cast<Eigen::Index>(k)) = basis[k](view);
    return out;
}

SampledSignal virtual_error(const SampledSignal& y, const SampledSignal& p, const LeftInverseFilter& inverse) {
    const SampledSignal g = reconstruct_input(inverse, y, p);
    std::vector<std::optional<double>> out(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (g.available(t) && y.available(t)) out[t] = g.value(t) - y.value(t);
    }
    return SampledSignal(std::move(out), y.sample_period(), y.start_index());
}

RegressionSystem build_regression(const ExperimentLog& log, const ExperimentLog* instrument_log,
                                  const ControllerStructure& structure, const LpvStateSpace& reference_model,
                                  const std::vector<Eigen::VectorXd>* centers) {
    structure.validate();
    const LeftInverseFilter inv = left_inverse(reference_model);
    const StructuralRows train = structural_rows(log, structure, inv);

    std::optional<StructuralRows> instr;
    if (instrument_log) {
        if (instrument_log->size() != log.size()) throw ShapeError("instrument log and training log differ in length");
        instr = structural_rows(*instrument_log, structure, inv);
    }

    // Rows kept: valid in the training log and, when present, in the instrument log.
    std::vector<std::size_t> keep_train, keep_instr;
    if (instr) {
        std::size_t k = 0;
        for (std::size_t i = 0; i < train.index.size(); ++i) {
            while (k < instr->index.size() && instr->index[k] < train.index[i]) ++k;
            if (k < instr->index.size() && instr->index[k] == train.index[i]) {
                keep_train.push_back(i);
                keep_instr.push_back(k);
            }
        }
    } else {
        keep_train.resize(train.index.size());
        for (std::size_t i = 0; i < keep_train.size(); ++i) keep_train[i] = i;
    }
    if (keep_train.empty()) throw RangeError("log too short for the controller orders and scheduling lags");

    RegressionSystem sys;
    if (structure.is_kernel()) {
        if (centers) {
            sys.centers = *centers;
        } else {
            const std::size_t stride = std::get<KernelCoefficients>(structure.coefficients).center_stride;
            for (std::size_t i = 0; i < keep_train.size(); i += stride) sys.centers.push_back(train.pis[keep_train[i]]);
        }
    }

    const auto nrows = static_cast<Eigen::Index>(keep_train.size());
    const auto nf = static_cast<Eigen::Index>(feature_count_for(structure, sys.centers.size()));
    const auto ncols = static_cast<Eigen::Index>(structure.term_count()) * nf;
    sys.rows.resize(nrows, ncols);
    sys.targets.resize(nrows);
    if (instr) sys.instruments = Eigen::MatrixXd(nrows, ncols);
    for (Eigen::Index r = 0; r < nrows; ++r) {
        const std::size_t i = keep_train[static_cast<std::size_t>(r)];
        const std::size_t t = train.index[i];
        sys.sample_index.push_back(t);
        sys.targets(r) = log.u().value(t);
        sys.rows.row(r) = kron_row(train.terms[i], coefficient_features(structure, sys.centers, train.pis[i]));
        if (instr) {
            const std::size_t k = keep_instr[static_cast<std::size_t>(r)];
            sys.instruments->row(r) =
                kron_row(instr->terms[k], coefficient_features(structure, sys.centers, instr->pis[k]));
        }
    }
    return sys;
}

Eigen::VectorXd fit_ls(const RegressionSystem& system, double gamma) {
    check_gamma(gamma);
    const auto& phi = system.rows;
    const double n = static_cast<double>(phi.rows());
    if (phi.rows() == 0) throw MisuseError("fit_ls on an empty regression system");
    if (phi.cols() <= phi.rows()) {
        Eigen::MatrixXd normal = phi.transpose() * phi / n;
        normal.diagonal().array() += 1.0 / gamma;
        return solve_spd(normal, phi.transpose() * system.targets / n, "fit_ls");
    }
    // More features than rows: same minimizer through the N x N dual system.
    Eigen::MatrixXd gram = phi * phi.transpose();
    gram.diagonal().array() += n / gamma;
    return phi.transpose() * solve_spd(gram, system.targets, "fit_ls (dual)");
}

Eigen::VectorXd fit_iv(const RegressionSystem& system, double gamma) {
    check_gamma(gamma);
    if (!system.instruments) throw MisuseError("fit_iv requires instruments");
    const auto& phi = system.rows;
    const auto& z = *system.instruments;
    if (phi.rows() == 0) throw MisuseError("fit_iv on an empty regression system");
    const double n = static_cast<double>(phi.rows());
    if (phi.cols() <= phi.rows()) {
        const Eigen::MatrixXd s = z.transpose() * phi / n;
        const Eigen::VectorXd sv = z.transpose() * system.targets / n;
        Eigen::MatrixXd normal = s.transpose() * s;
        normal.diagonal().array() += 1.0 / gamma;
        return solve_spd(normal, s.transpose() * sv, "fit_iv");
    }
    // theta = Phi' beta with (Z Z' Phi Phi' / N^2 + I/gamma) beta = Z Z' tau / N^2.
    const Eigen::MatrixXd zz = z * z.transpose() / (n * n);
    Eigen::MatrixXd lhs = zz * (phi * phi.transpose());
    lhs.diagonal().array() += 1.0 / gamma;
    const Eigen::VectorXd beta = lhs.partialPivLu().solve(zz * system.targets);
    return phi.transpose() * beta;
}

Eigen::VectorXd fit(const RegressionSystem& system, const ControllerStructure& structure) {
    return structure.estimator == Estimator::InstrumentalVariables ? fit_iv(system, structure.gamma)
                                                                   : fit_ls(system, structure.gamma);
}

double residual_score(const RegressionSystem& system, const Eigen::VectorXd& theta) {
    if (system.rows.rows() == 0) throw MisuseError("residual of an empty regression system");
    return (system.targets - system.rows * theta).squaredNorm() / static_cast<double>(system.rows.rows());
}

InnerControllerModel::InnerControllerModel(ControllerStructure structure, Eigen::VectorXd theta,
                                           std::vector<Eigen::VectorXd> centers, LpvStateSpace reference_model)
    : structure_(std::move(structure)), theta_(std::move(theta)), centers_(std::move(centers)),
      reference_model_(std::move(reference_model)) {
    structure_.validate();
    const auto expected = static_cast<Eigen::Index>(structure_.term_count() * feature_count());
    if (theta_.size() != expected) {
        throw ShapeError("controller parameter vector has " + std::to_string(theta_.size()) + " entries, expected " +
                         std::to_string(expected));
    }
    for (const auto& c : centers_) {
        if (c.size() != static_cast<Eigen::Index>(structure_.scheduling_lags.size())) {
            throw ShapeError("kernel center dimension differs from the number of scheduling lags");
        }
    }
}

std::size_t InnerControllerModel::feature_count() const noexcept {
    return feature_count_for(structure_, centers_.size());
}

CoefficientValues InnerControllerModel::coefficients(const Eigen::VectorXd& pi) const {
    if (pi.size() != static_cast<Eigen::Index>(structure_.scheduling_lags.size())) {
        throw ShapeError("scheduling vector has wrong dimension");
    }
    const Eigen::VectorXd f = coefficient_features(structure_, centers_, pi);
    const auto nf = f.size();
    const auto na = static_cast<Eigen::Index>(structure_.n_a);
    const auto nb = static_cast<Eigen::Index>(structure_.n_b) + 1;
    CoefficientValues v{Eigen::VectorXd(na), Eigen::VectorXd(nb)};
    for (Eigen::Index k = 0; k < na; ++k) v.a(k) = theta_.segment(k * nf, nf).dot(f);
    for (Eigen::Index k = 0; k < nb; ++k) v.b(k) = theta_.segment((na + k) * nf, nf).dot(f);
    return v;
}

InnerControllerModel fit_inner_controller(const ExperimentLog& train, const ExperimentLog* instrument,
                                          const ControllerStructure& structure, const LpvStateSpace& reference_model) {
    if (structure.estimator == Estimator::InstrumentalVariables && !instrument) {
        throw MisuseError("instrumental-variable fit requires an instrument log");
    }
    const ExperimentLog* instr = structure.estimator == Estimator::InstrumentalVariables ? instrument : nullptr;
    RegressionSystem sys = build_regression(train, instr, structure, reference_model);
    Eigen::VectorXd theta = fit(sys, structure);
    return InnerControllerModel(structure, std::move(theta), std::move(sys.centers), reference_model);
}

std::vector<CvPoint> make_grid(const std::vector<double>& gammas, const std::vector<double>& sigmas) {
    std::vector<CvPoint> grid;
    for (double g : gammas) {
        for (double s : sigmas) grid.push_back({g, s});
    }
    return grid;
}

CvResult cross_validate(const ExperimentLog& train, const ExperimentLog* instrument, const ExperimentLog& val,
                        const std::vector<CvPoint>& grid, const ControllerStructure& structure,
                        const LpvStateSpace& reference_model) {
    if (grid.empty()) throw MisuseError("cross-validation grid is empty");
    const bool iv = structure.estimator == Estimator::InstrumentalVariables;
    if (iv && !instrument) throw MisuseError("instrumental-variable cross-validation requires an instrument log");

    // Systems only depend on sigma; group the grid so each sigma is assembled once.
    std::map<double, std::vector<std::size_t>> by_sigma;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        by_sigma[structure.is_kernel() ? grid[i].sigma : 0.0].push_back(i);
    }
    CvResult result;
    result.table = grid;
    for (const auto& [sigma, members] : by_sigma) {
        ControllerStructure s = structure;
        if (auto* k = std::get_if<KernelCoefficients>(&s.coefficients)) k->sigma = sigma;
        const RegressionSystem tr = build_regression(train, iv ? instrument : nullptr, s, reference_model);
        const RegressionSystem va = build_regression(val, nullptr, s, reference_model, &tr.centers);
        for (std::size_t i : members) {
            const Eigen::VectorXd theta = iv ? fit_iv(tr, grid[i].gamma) : fit_ls(tr, grid[i].gamma);
            result.table[i].score = residual_score(va, theta);
            spdlog::debug("cv gamma={} sigma={} score={:.6e}", grid[i].gamma, grid[i].sigma, result.table[i].score);
        }
    }

    auto better = [](const CvPoint& a, const CvPoint& b) {
        const double tol = 1e-12 * std::max(std::abs(a.score), std::abs(b.score));
        if (std::abs(a.score - b.score) > tol) return a.score < b.score;
        if (a.gamma != b.gamma) return a.gamma > b.gamma;
        return a.sigma > b.sigma;
    };
    result.best = result.table.front();
    for (const auto& p : result.table) {
        if (better(p, result.best)) result.best = p;
    }
    return result;
}

ControllerHistory ControllerHistory::zeros(const ControllerStructure& structure) {
    return {std::vector<double>(structure.n_a, 0.0), std::vector<double>(structure.n_b, 0.0), 0.0};
}

double controller_step(const InnerControllerModel& ctrl, ControllerHistory& history, double g, double y,
                       const Eigen::VectorXd& pi) {
    const auto& s = ctrl.structure();
    if (history.u.size() != s.n_a || history.ef.size() != s.n_b) throw ShapeError("controller history has wrong size");
    const CoefficientValues c = ctrl.coefficients(pi);
    const double e = g - y;
    double ef = e;
    if (s.fixed_part == FixedPart::Integrator) {
        history.e_int += e;
        ef = history.e_int;
    }
    double u = c.b(0) * ef;
    for (std::size_t i = 0; i < s.n_a; ++i) u -= c.a(static_cast<Eigen::Index>(i)) * history.u[i];
    for (std::size_t j = 0; j < s.n_b; ++j) u += c.b(static_cast<Eigen::Index>(j + 1)) * history.ef[j];
    if (s.n_a > 0) {
        std::rotate(history.u.rbegin(), history.u.rbegin() + 1, history.u.rend());
        history.u.front() = u;
    }
    if (s.n_b > 0) {
        std::rotate(history.ef.rbegin(), history.ef.rbegin() + 1, history.ef.rend());
        history.ef.front() = ef;
    }
    return u;
}

// ---- serialization ----

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const char* name) {
    Eigen::MatrixXd m(rows, cols);
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        throw ShapeError(std::string("matrix ") + name + " must have " + std::to_string(rows) + " rows");
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ShapeError(std::string("matrix ") + name + " must have " + std::to_string(cols) + " columns");
        }
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
    return m;
}

const char* fixed_name(FixedPart f) { return f == FixedPart::Integrator ? "integrator" : "none"; }

} // namespace

void to_json(nlohmann::json& j, const ControllerStructure& s) {
    j = nlohmann::json{{"n_a", s.n_a},
                       {"n_b", s.n_b},
                       {"scheduling_lags", s.scheduling_lags},
                       {"fixed_part", fixed_name(s.fixed_part)},
                       {"gamma", s.gamma},
                       {"estimator", s.estimator == Estimator::InstrumentalVariables ? "iv" : "ls"}};
    if (const auto* k = std::get_if<KernelCoefficients>(&s.coefficients)) {
        j["coefficients"] = {{"type", "kernel"}, {"sigma", k->sigma}, {"center_stride", k->center_stride}};
    } else {
        nlohmann::json basis = nlohmann::json::array();
        for (const auto& f : std::get<ParametricCoefficients>(s.coefficients).basis) basis.push_back(f.to_string());
        j["coefficients"] = {{"type", "parametric"}, {"basis", basis}};
    }
}

void from_json(const nlohmann::json& j, ControllerStructure& s) {
    s.n_a = j.at("n_a").get<std::size_t>();
    s.n_b = j.at("n_b").get<std::size_t>();
    s.scheduling_lags = j.value("scheduling_lags", std::vector<std::size_t>{});
    const std::string fixed = j.value("fixed_part", std::string("none"));
    if (fixed == "integrator") {
        s.fixed_part = FixedPart::Integrator;
    } else if (fixed == "none") {
        s.fixed_part = FixedPart::None;
    } else {
        throw std::invalid_argument("fixed_part must be 'none' or 'integrator', got '" + fixed + "'");
    }
    s.gamma = j.at("gamma").get<double>();
    const std::string est = j.value("estimator", std::string("ls"));
    if (est != "ls" && est != "iv") throw std::invalid_argument("estimator must be 'ls' or 'iv', got '" + est + "'");
    s.estimator = est == "iv" ? Estimator::InstrumentalVariables : Estimator::LeastSquares;
    const auto& c = j.at("coefficients");
    const std::string type = c.at("type").get<std::string>();
    if (type == "kernel") {
        s.coefficients = KernelCoefficients{c.at("sigma").get<double>(), c.value("center_stride", std::size_t{1})};
    } else if (type == "parametric") {
        ParametricCoefficients p;
        p.basis.clear();
        for (const auto& f : c.at("basis")) p.basis.push_back(BasisFunction::parse(f.get<std::string>()));
        s.coefficients = std::move(p);
    } else {
        throw std::invalid_argument("coefficients.type must be 'kernel' or 'parametric', got '" + type + "'");
    }
    s.validate();
}

nlohmann::json to_json(const LpvStateSpace& m) {
    nlohmann::json basis = nlohmann::json::array();
    for (const auto& f : m.basis()) basis.push_back(f.to_string());
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : m.terms()) {
        terms.push_back({{"A", matrix_json(t.A)}, {"B", matrix_json(t.B)}, {"C", matrix_json(t.C)}, {"D", matrix_json(t.D)}});
    }
    return {{"n_x", m.state_dim()},
            {"n_u", m.input_dim()},
            {"n_y", m.output_dim()},
            {"basis", basis},
            {"terms", terms},
            {"scheduling_min", m.scheduling_min},
            {"scheduling_max", m.scheduling_max}};
}

LpvStateSpace lpv_from_json(const nlohmann::json& j) {
    const auto nx = j.at("n_x").get<Eigen::Index>();
    const auto nu = j.value("n_u", Eigen::Index{1});
    const auto ny = j.value("n_y", Eigen::Index{1});
    Basis basis;
    for (const auto& f : j.at("basis")) basis.push_back(BasisFunction::parse(f.get<std::string>()));
    std::vector<LpvStateSpace::Term> terms;
    for (const auto& t : j.at("terms")) {
        terms.push_back({matrix_from_json(t.at("A"), nx, nx, "A"), matrix_from_json(t.at("B"), nx, nu, "B"),
                         matrix_from_json(t.at("C"), ny, nx, "C"), matrix_from_json(t.at("D"), ny, nu, "D")});
    }
    LpvStateSpace m(std::move(basis), std::move(terms));
    m.scheduling_min = j.value("scheduling_min", -1.0);
    m.scheduling_max = j.value("scheduling_max", 1.0);
    return m;
}

nlohmann::json to_json(const InnerControllerModel& c) {
    nlohmann::json centers = nlohmann::json::array();
    for (const auto& v : c.centers()) centers.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    const auto& theta = c.theta();
    return {{"structure", c.structure()},
            {"centers", centers},
            {"theta", std::vector<double>(theta.data(), theta.data() + theta.size())},
            {"reference_model", to_json(c.reference_model())}};
}

InnerControllerModel controller_from_json(const nlohmann::json& j) {
    const auto structure = j.at("structure").get<ControllerStructure>();
    std::vector<Eigen::VectorXd> centers;
    for (const auto& c : j.at("centers")) {
        const auto v = c.get<std::vector<double>>();
        centers.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    const auto theta = j.at("theta").get<std::vector<double>>();
    return InnerControllerModel(structure,
                                Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size())),
                                std::move(centers), lpv_from_json(j.at("reference_model")));
}

} // namespace lpvdd
