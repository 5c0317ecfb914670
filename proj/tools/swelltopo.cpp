#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "swelltopo/cli/driver.hpp"

namespace {

int fail(const swelltopo::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return swelltopo::exit_code(e.kind());
}

bool parse_resolution(const std::string& s, int& nx, int& ny) {
    const auto x = s.find('x');
    if (x == std::string::npos) return false;
    try {
        std::size_t a = 0, b = 0;
        nx = std::stoi(s.substr(0, x), &a);
        ny = std::stoi(s.substr(x + 1), &b);
        return a == x && b == s.size() - x - 1;
    } catch (const std::exception&) {
        return false;
    }
}

} // namespace

int main(int argc, char** argv) {
    using namespace swelltopo;
    CLI::App app{"Topology optimization of swelling gel-elastomer composites"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "Forward solve or optimization described by a config file");
    run->add_option("config", config_path, "Problem config (INFO format)")->required();

    std::string snapshot_path, res = "64x64", out_dir;
    auto* resample = app.add_subcommand("resample", "Sample a saved network on a raster");
    resample->add_option("snapshot", snapshot_path, "Network snapshot file")->required();
    resample->add_option("--res", res, "Raster resolution NxM")->capture_default_str();
    resample->add_option("--out", out_dir, "Output directory (default: next to the snapshot)");

    int fd_count = 20;
    std::uint64_t fd_seed = 0;
    auto* fdcheck = app.add_subcommand("fdcheck", "Compare the adjoint gradient with central differences");
    fdcheck->add_option("config", config_path, "Problem config (INFO format)")->required();
    fdcheck->add_option("--count", fd_count, "Number of weights to check")->capture_default_str();
    fdcheck->add_option("--seed", fd_seed, "Seed for picking weights")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const ProblemConfig c = load_config(config_path);
            if (c.mode == RunMode::forward)
                run_forward(c, std::cout);
            else
                run_optimize(c, std::cout);
        } else if (*resample) {
            int nx = 0, ny = 0;
            if (!parse_resolution(res, nx, ny)) throw ConfigError("--res must be NxM, got '" + res + "'");
            const DesignNetwork net = load_network(snapshot_path);
            const fs::path dir = out_dir.empty() ? fs::path(snapshot_path).parent_path() /
                                                       (fs::path(snapshot_path).stem().string() + "_" + res)
                                                 : fs::path(out_dir);
            write_raster(dir, resample_design(net, nx, ny), {});
            std::cout << "wrote " << dir.string() << '\n';
        } else if (*fdcheck) {
            const ProblemConfig c = load_config(config_path);
            if (c.mode != RunMode::optimize) throw ConfigError("fdcheck needs an optimize-mode config");
            run_fdcheck(c, fd_count, fd_seed, std::cout);
        }
    } catch (const Error& e) {
        return fail(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
