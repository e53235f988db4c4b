#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "cardylab/harness.hpp"

using namespace cardylab;

namespace {

struct Overrides {
    std::string config_path = "config/defaults.json";
    std::optional<std::uint64_t> samples, seed;
    std::vector<int> ladder;
    std::optional<double> theta;
    std::array<std::optional<double>, 6> a;
    std::string domain, out_dir;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "JSON config file")->capture_default_str();
        app->add_option("--samples", samples, "Monte Carlo samples per scale");
        app->add_option("--n-ladder", ladder, "scales, strictly increasing")->delimiter(',');
        app->add_option("--seed", seed, "stream seed");
        app->add_option("--theta", theta, "Harris crossing window");
        for (int k = 0; k < 6; ++k) app->add_option("--a" + std::to_string(k + 1), a[k], "exponent a" + std::to_string(k + 1));
        app->add_option("--domain", domain, "builtin domain name");
        app->add_option("--out", out_dir, "output root");
    }

    ExperimentConfig resolve() const {
        ExperimentConfig c = load_config(config_path);
        if (samples) {
            c.samples = *samples;
            c.samples_per_n.clear();
        }
        if (seed) c.seed = *seed;
        if (!ladder.empty()) c.n_ladder = ladder;
        if (theta) c.harris.theta = *theta;
        double* slots[6] = {&c.a1, &c.a2, &c.a3, &c.a4, &c.a5, &c.a6};
        for (int k = 0; k < 6; ++k)
            if (a[k]) *slots[k] = *a[k];
        if (!domain.empty()) {
            c.domain = {domain, {}};
            c.marks.reset();
        }
        if (!out_dir.empty()) c.out_dir = out_dir;
        c.validate();
        return c;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"critical percolation crossing laboratory"};
    app.require_subcommand(1);
    Overrides ov;
    std::string fit_csv;
    std::function<int(const ExperimentConfig&)> action;
    auto add = [&](const std::string& name, const std::string& help, std::function<int(const ExperimentConfig&)> fn) {
        auto* sub = app.add_subcommand(name, help);
        ov.attach(sub);
        sub->callback([&action, fn] { action = fn; });
        return sub;
    };
    add("discretize", "canonical and regularized lattice domains", cmd_discretize);
    add("estimate", "crossing functions at the marked point", cmd_estimate);
    add("convergence", "crossing probability against its limit and the rate fit", cmd_convergence);
    add("regularize", "canonical against regularized domain", cmd_regularization);
    add("sigma-holo", "contour integrals of the crossing function", cmd_sigma_holo);
    add("cauchy", "Cauchy extension proximity and winding", cmd_cauchy);
    add("harris", "Harris systems and ring verification", cmd_harris);
    auto* fit = add("fit", "power-law fit of n,value,stderr rows", [&fit_csv](const ExperimentConfig& c) { return cmd_fit(c, fit_csv); });
    fit->add_option("csv", fit_csv, "input CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }
    try {
        int rc = action(ov.resolve());
        if (rc == 2) std::fprintf(stderr, "assertion failures; see assertions.json in the run directory\n");
        return rc;
    } catch (const Error& e) {
        std::fprintf(stderr, "error %s: %s\n", to_string(e.code()), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
