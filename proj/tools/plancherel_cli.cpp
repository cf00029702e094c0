// plancherel_cli: calibrations, c-functions, spherical functions, transforms
// and numerical checks on the supported symmetric spaces.
//
// Exit codes: 0 all checks pass, 1 a check failed, 2 usage or config error,
// 3 numerical infrastructure error (quadrature, calibration, truncation).

#include <algorithm>
#include <functional>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using namespace cli;

/// Flag values are copied into the config only when given on the command
/// line, so defaults live in one place (RunConfig).
class FlagBinder {
public:
    template <class T>
    CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app->add_option(flag, *value, help);
        bound_.push_back({opt, [value, key](json& j) { j[key] = *value; }});
        return opt;
    }

    void apply(json& j) const {
        for (const auto& [opt, write] : bound_)
            if (opt->count() > 0)
                write(j);
    }

private:
    std::vector<std::pair<CLI::Option*, std::function<void(json&)>>> bound_;
};

int numeric_failure(const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumeric;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Harmonic analysis on Riemannian symmetric spaces G/K"};
    app.require_subcommand(1);
    FlagBinder flags;

    std::string config_file, output_dir;
    app.add_option("--config", config_file, "JSON config; its entries override flags")->check(CLI::ExistingFile);
    app.add_option("--output-dir", output_dir,
                   std::string("directory for reports and CSV files (default: $") + kOutputDirEnv + " or cwd)");
    flags.add<std::string>(&app, "--model", "model", "sl2r | so12 | so13 | sl3r");
    flags.add<std::uint64_t>(&app, "--seed", "seed", "random seed");
    flags.add<unsigned>(&app, "--threads", "threads", "worker threads (0 = all cores)");
    flags.add<int>(&app, "--samples", "samples", "number of random samples (0 = command default)");

    auto spectral = [&](CLI::App* sc) {
        flags.add<std::vector<double>>(sc, "--lambda", "lambda", "Im lambda, orthonormal coordinates of a*")
            ->delimiter(',');
        flags.add<std::vector<double>>(sc, "--lambda-re", "lambda_re", "Re lambda")->delimiter(',');
    };
    auto grid = [&](CLI::App* sc) {
        flags.add<double>(sc, "--lambda-max", "lambda_max", "spectral cutoff");
        flags.add<int>(sc, "--resolution", "radial_panels", "Gauss-Legendre panels in |lambda|");
    };
    auto profile = [&](CLI::App* sc) {
        flags.add<std::string>(sc, "--input", "input", "profile JSON (bump description or sampled values)");
        flags.add<double>(sc, "--profile-step", "profile_step", "radial sampling step");
    };

    std::map<CLI::App*, std::string> names;
    auto sub = [&](CLI::App* parent, const std::string& name, const std::string& help) {
        CLI::App* sc = parent->add_subcommand(name, help)->fallthrough();
        names[sc] = parent == &app ? name : names[parent] + " " + name;
        return sc;
    };

    sub(&app, "calibrate", "Haar normalization of N and the Cartan density constant");
    spectral(sub(&app, "cfunc", "c-function at lambda and integral/product oracle"));
    CLI::App* density = sub(&app, "density", "Plancherel density table (CSV + JSON)");
    flags.add<double>(density, "--lambda-max", "lambda_max", "chamber coordinates run over (0, lambda-max]");
    flags.add<int>(density, "--points", "points", "samples per chamber coordinate");
    CLI::App* phi = sub(&app, "phi", "phi_lambda along a geodesic with its constant term");
    spectral(phi);
    flags.add<std::vector<double>>(phi, "--geodesic", "geodesic", "X in a (default: unit vector in a^-)")
        ->delimiter(',');
    flags.add<std::vector<double>>(phi, "--t-range", "t_range", "start,end,step")->delimiter(',')->expected(3);

    CLI::App* check = sub(&app, "check", "numerical identity checks");
    check->require_subcommand(1);
    const std::vector<std::pair<std::string, void (*)(Context&, Report&)>> checks = {
        {"mean-value", check_mean_value},       {"w-invariance", check_w_invariance},
        {"maass-selberg", check_maass_selberg}, {"asymptotics", check_asymptotics},
        {"tempered", check_tempered},           {"parseval-horo", check_parseval_horo},
        {"convolution", check_convolution}};
    std::map<CLI::App*, void (*)(Context&, Report&)> runners;
    for (const auto& [name, fn] : checks) {
        CLI::App* sc = sub(check, name, name + " check");
        if (name == "tempered")
            flags.add<std::vector<double>>(sc, "--geodesic", "geodesic", "X in a")->delimiter(',');
        runners[sc] = fn;
    }

    CLI::App* transform = sub(&app, "transform", "spectra of a function");
    transform->require_subcommand(1);
    CLI::App* tsph = sub(transform, "spherical", "spherical transform of a radial profile");
    profile(tsph);
    grid(tsph);
    CLI::App* thoro = sub(transform, "horo", "horospherical transform norms of a random function");
    CLI::App* invert = sub(&app, "invert", "transform, invert and compare");
    profile(invert);
    grid(invert);
    flags.add<std::string>(invert, "--bump", "bump_name", "default | gaussian | smooth");
    CLI::App* average = sub(&app, "average", "Cesaro means of an oscillatory sum");
    flags.add<std::string>(average, "--spec", "spec", "eigendata JSON");
    flags.add<std::vector<int>>(average, "--n-list", "n_list", "values of n")->delimiter(',');

    for (auto& [sc, name] : names) {
        if (name == "calibrate")
            runners[sc] = run_calibrate;
        else if (name == "cfunc")
            runners[sc] = run_cfunc;
        else if (name == "density")
            runners[sc] = run_density;
        else if (name == "phi")
            runners[sc] = run_phi;
        else if (name == "transform spherical")
            runners[sc] = run_transform_spherical;
        else if (name == "transform horo")
            runners[sc] = run_transform_horo;
        else if (name == "invert")
            runners[sc] = run_invert;
        else if (name == "average")
            runners[sc] = run_average;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kUsage;
    }

    CLI::App* leaf = &app;
    while (!leaf->get_subcommands().empty())
        leaf = leaf->get_subcommands().front();
    const auto runner = runners.find(leaf);
    if (runner == runners.end() || !runner->second) {
        std::cerr << "no pipeline for this command\n";
        return kUsage;
    }

    RunConfig cfg;
    try {
        json j = RunConfig{}.to_json();
        flags.apply(j);
        j["command"] = names[leaf];
        if (!output_dir.empty())
            j["output_dir"] = output_dir;
        if (!config_file.empty()) {
            std::ifstream f(config_file);
            j.merge_patch(json::parse(f));
        }
        if (j.contains("bump_name")) {
            const std::string b = j["bump_name"];
            if (b == "gaussian")
                j["bump"] = {{"kind", "gaussian"}, {"sigma", 0.35}, {"radius", 2.5}};
            else if (b == "smooth")
                j["bump"] = {{"kind", "smooth"}, {"radius", 2.0}, {"shape", 0.0}};
            else if (b != "default")
                throw UsageError("unknown bump '" + b + "'");
            j.erase("bump_name");
        }
        cfg = RunConfig::from_json(j);
        if (cfg.output_dir.empty())
            cfg.output_dir = default_output_dir();
        fs::create_directories(cfg.output_dir);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        Context ctx(cfg);
        Report rep(cfg);
        runner->second(ctx, rep);
        std::string slug = cfg.command;
        std::replace(slug.begin(), slug.end(), ' ', '_');
        rep.write(slug);
        if (!rep.pass()) {
            std::cerr << "failing checks:";
            for (const auto& n : rep.failing())
                std::cerr << " " << n;
            std::cerr << "\n";
            return kCheckFailed;
        }
        return kPass;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const plancherel::ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return kUsage;
    } catch (const plancherel::InvalidElementError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return kUsage;
    } catch (const json::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        return numeric_failure(e);
    }
}
