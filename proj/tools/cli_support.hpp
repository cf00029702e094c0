#pragma once

// Run configuration, reports and output helpers for plancherel_cli.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>
#include <openssl/evp.h>

#include "plancherel/plancherel.hpp"

namespace cli {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "1.0.0";
constexpr const char* kOutputDirEnv = "PLANCHEREL_OUTPUT_DIR";

enum Exit { kPass = 0, kCheckFailed = 1, kUsage = 2, kNumeric = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Every tunable of a run. Flags fill a JSON object, a config file is merged
/// over it, and the result is parsed here.
struct RunConfig {
    std::string command;
    std::string model = "sl2r";
    std::uint64_t seed = 1;
    unsigned threads = 1;
    fs::path output_dir;
    int samples = 0;                // 0 = command default

    std::vector<double> lambda;     // imaginary part, orthonormal coordinates of a*
    std::vector<double> lambda_re;  // real part
    std::vector<double> geodesic;   // X in a, empty = unit vector through the middle of a^-
    std::vector<double> t_range = {0.0, 10.0, 0.5};

    double lambda_max = 40.0;
    int points = 200;
    int radial_panels = 20;
    int radial_order = 8;
    int angular_points = 12;
    int round_trip_points = 25;

    json bump = {{"kind", "gaussian"}, {"sigma", 0.35}, {"radius", 2.5}};
    double profile_step = 0.005;
    std::string input;
    std::string spec;
    std::vector<int> n_list = {10, 100, 1000, 2000};

    json tolerances = {{"c_oracle", 1e-6},       {"maass_selberg", 1e-6},   {"mean_value", 1e-7},
                       {"w_invariance", 1e-6},   {"asymptotic_rate", 0.1},  {"parseval_horo", 1e-4},
                       {"regrouping", 1e-6},     {"commutativity", 1e-6},   {"multiplicativity", 1e-5},
                       {"round_trip_sup", 1e-3}, {"round_trip_parseval", 1e-3},
                       {"calibration_spread", 1e-5}, {"normalization", 1e-8}, {"cesaro", 5e-3}};

    plancherel::QuadratureSpec quadrature;
    plancherel::SphericalOptions spherical;

    int samples_or(int fallback) const { return samples > 0 ? samples : fallback; }

    double tol(const std::string& name) const { return tolerances.at(name).get<double>(); }

    plancherel::ModelPtr make_model() const { return plancherel::GroupModel::from_name(model); }

    json to_json() const {
        json j;
        j["command"] = command;
        j["model"] = model;
        j["seed"] = seed;
        j["threads"] = threads;
        j["samples"] = samples;
        j["lambda"] = lambda;
        j["lambda_re"] = lambda_re;
        j["geodesic"] = geodesic;
        j["t_range"] = t_range;
        j["lambda_max"] = lambda_max;
        j["points"] = points;
        j["radial_panels"] = radial_panels;
        j["radial_order"] = radial_order;
        j["angular_points"] = angular_points;
        j["round_trip_points"] = round_trip_points;
        j["bump"] = bump;
        j["profile_step"] = profile_step;
        j["input"] = input;
        j["spec"] = spec;
        j["n_list"] = n_list;
        j["tolerances"] = tolerances;
        j["quadrature"] = quadrature;
        j["spherical"] = spherical;
        return j;
    }

    static RunConfig from_json(const json& j) {
        RunConfig c;
        const json d = c.to_json();
        auto get = [&](const char* key, auto& field) {
            field = j.value(key, d.at(key)).template get<std::decay_t<decltype(field)>>();
        };
        get("command", c.command);
        get("model", c.model);
        get("seed", c.seed);
        get("threads", c.threads);
        get("samples", c.samples);
        get("lambda", c.lambda);
        get("lambda_re", c.lambda_re);
        get("geodesic", c.geodesic);
        get("t_range", c.t_range);
        get("lambda_max", c.lambda_max);
        get("points", c.points);
        get("radial_panels", c.radial_panels);
        get("radial_order", c.radial_order);
        get("angular_points", c.angular_points);
        get("round_trip_points", c.round_trip_points);
        get("bump", c.bump);
        get("profile_step", c.profile_step);
        get("input", c.input);
        get("spec", c.spec);
        get("n_list", c.n_list);
        c.tolerances.update(j.value("tolerances", json::object()));
        if (j.contains("quadrature"))
            c.quadrature = j.at("quadrature").get<plancherel::QuadratureSpec>();
        if (j.contains("spherical"))
            c.spherical = j.at("spherical").get<plancherel::SphericalOptions>();
        if (j.contains("output_dir"))
            c.output_dir = j.at("output_dir").get<std::string>();
        c.validate();
        return c;
    }

    void validate() const {
        for (const auto& [name, v] : tolerances.items())
            if (!v.is_number() || !(v.get<double>() > 0.0))
                throw UsageError("tolerance '" + name + "' must be a positive number");
        if (samples < 0 || points < 2 || radial_panels < 1 || radial_order < 1 || angular_points < 1 ||
            round_trip_points < 1)
            throw UsageError("sample counts and grid resolutions must be positive");
        if (!(lambda_max > 0.0) || !(profile_step > 0.0))
            throw UsageError("lambda-max and profile step must be positive");
        if (t_range.size() != 3 || !(t_range[2] > 0.0) || t_range[1] < t_range[0])
            throw UsageError("t-range must be start,end,step with step > 0 and end >= start");
        if (n_list.empty())
            throw UsageError("n-list must not be empty");
        for (int n : n_list)
            if (n < 1)
                throw UsageError("n-list entries must be positive");
        plancherel::GroupModel::from_name(model);
    }

    /// Lambda from the configured coordinates, padded with zeros to the rank.
    plancherel::SpectralParam spectral_param(int rank) const {
        if (static_cast<int>(lambda.size()) > rank || static_cast<int>(lambda_re.size()) > rank)
            throw UsageError("lambda has more coordinates than the rank");
        plancherel::SpectralParam l{plancherel::Vec::Zero(rank), plancherel::Vec::Zero(rank)};
        for (std::size_t i = 0; i < lambda.size(); ++i)
            l.im[i] = lambda[i];
        for (std::size_t i = 0; i < lambda_re.size(); ++i)
            l.re[i] = lambda_re[i];
        return l;
    }

    plancherel::Vec direction(const plancherel::GroupModel& m) const {
        if (geodesic.empty()) {
            plancherel::Vec x = plancherel::Vec::Zero(m.rank());
            for (const auto& g : m.negative_chamber_generators())
                x += g.normalized();
            return x.normalized();
        }
        if (static_cast<int>(geodesic.size()) != m.rank())
            throw UsageError("geodesic must have one coordinate per rank");
        return Eigen::Map<const plancherel::Vec>(geodesic.data(), m.rank());
    }
};

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i)
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

inline std::string format_double(double v) {
    if (std::isnan(v) || std::isinf(v))
        return "null";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// JSON writer printing every float with 17 significant digits.
inline void write_json(std::ostream& os, const json& j, int indent = 0) {
    const std::string pad(indent + 2, ' '), close(indent, ' ');
    switch (j.type()) {
    case json::value_t::object: {
        if (j.empty()) {
            os << "{}";
            return;
        }
        os << "{\n";
        bool first = true;
        for (const auto& [k, v] : j.items()) {
            os << (first ? "" : ",\n") << pad << json(k).dump() << ": ";
            write_json(os, v, indent + 2);
            first = false;
        }
        os << "\n" << close << "}";
        return;
    }
    case json::value_t::array: {
        if (j.empty()) {
            os << "[]";
            return;
        }
        const bool flat = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
        os << (flat ? "[" : "[\n");
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (!flat)
                os << pad;
            write_json(os, j[i], indent + 2);
            if (i + 1 < j.size())
                os << (flat ? ", " : ",\n");
        }
        os << (flat ? "]" : "\n" + close + "]");
        return;
    }
    case json::value_t::number_float: os << format_double(j.get<double>()); return;
    default: os << j.dump();
    }
}

struct CheckResult {
    std::string name;
    double residual = 0.0;   // worst case over samples
    double mean = 0.0;
    int samples = 0;
    double threshold = 0.0;
    bool pass = false;
    json extra = json::object();
};

inline CheckResult summarize(const std::string& name, const std::vector<double>& residuals, double threshold) {
    CheckResult c;
    c.name = name;
    c.threshold = threshold;
    c.samples = static_cast<int>(residuals.size());
    for (double r : residuals) {
        c.residual = std::max(c.residual, r);
        c.mean += r / residuals.size();
    }
    c.pass = c.samples > 0 && c.residual < threshold;
    for (double r : residuals)
        if (!std::isfinite(r))
            c.pass = false;
    return c;
}

class Report {
public:
    explicit Report(const RunConfig& cfg) : cfg_(cfg), start_(std::chrono::steady_clock::now()) {}

    void add(CheckResult c) { checks_.push_back(std::move(c)); }
    json& results() { return results_; }

    fs::path data_path(const std::string& file) {
        files_.push_back(file);
        return cfg_.output_dir / file;
    }

    bool pass() const {
        return std::all_of(checks_.begin(), checks_.end(), [](const CheckResult& c) { return c.pass; });
    }

    std::vector<std::string> failing() const {
        std::vector<std::string> out;
        for (const auto& c : checks_)
            if (!c.pass)
                out.push_back(c.name);
        return out;
    }

    /// Everything except the timing block is a pure function of the config.
    json to_json() const {
        const json config = cfg_.to_json();
        json checks = json::array();
        for (const auto& c : checks_)
            checks.push_back({{"name", c.name},
                              {"residual", c.residual},
                              {"mean_residual", c.mean},
                              {"samples", c.samples},
                              {"threshold", c.threshold},
                              {"pass", c.pass},
                              {"details", c.extra}});
        return {{"command", cfg_.command},
                {"config", config},
                {"config_hash", sha256_hex(config.dump())},
                {"versions",
                 {{"plancherel", kVersion},
                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                "." + std::to_string(EIGEN_MINOR_VERSION)},
                  {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                        std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                        std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                  {"compiler", __VERSION__}}},
                {"checks", checks},
                {"pass", pass()},
                {"results", results_},
                {"data_files", files_},
                {"timing",
                 {{"elapsed_seconds",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()}}}};
    }

    /// Writes <output_dir>/<slug>.json and echoes it on stdout.
    void write(const std::string& slug) const {
        const json j = to_json();
        std::ofstream f(cfg_.output_dir / (slug + ".json"));
        write_json(f, j);
        f << "\n";
        write_json(std::cout, j);
        std::cout << "\n";
    }

private:
    const RunConfig& cfg_;
    std::chrono::steady_clock::time_point start_;
    std::vector<CheckResult> checks_;
    std::vector<std::string> files_;
    json results_ = json::object();
};

inline fs::path default_output_dir() {
    if (const char* env = std::getenv(kOutputDirEnv); env && *env)
        return env;
    return fs::current_path();
}

inline json cplx_json(plancherel::cplx z) { return json::array({z.real(), z.imag()}); }

inline json vec_json(const plancherel::Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json lambda_json(const plancherel::SpectralParam& l) { return {{"re", vec_json(l.re)}, {"im", vec_json(l.im)}}; }

inline std::ofstream open_csv(const fs::path& p) {
    std::ofstream f(p);
    if (!f)
        throw UsageError("cannot write " + p.string());
    f << std::setprecision(17);
    return f;
}

} // namespace cli
