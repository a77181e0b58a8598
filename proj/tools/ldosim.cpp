#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "ldosim/app.hpp"
#include "ldosim/errors.hpp"

int main(int argc, char** argv) {
    using namespace ldosim;

    CLI::App app{"Behavioral simulator of a dual-range capacitor-less LDO regulator"};
    std::string command, paramsPath, outDir, configPath;
    app.add_option("command", command, "ac | loopgain | transient | psr | metrics | report")->required();
    app.add_option("--params", paramsPath, "Parameter file (default: built-in calibration)");
    app.add_option("--out", outDir, "Output directory (default: current directory)");
    app.add_option("--config", configPath, "Run configuration file");
    app.footer("Thread count for frequency sweeps: LDOSIM_THREADS.\n"
               "Exit status: 0 ok, 1 internal error, 2 configuration error, 3 solver error, 4 report row failed.");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    RunConfig config;
    try {
        if (!configPath.empty()) config = load_run_config(configPath);
        config.command = command_from_string(command);
    } catch (const Error& e) {
        std::cerr << "ldosim: configuration error: " << e.what() << '\n';
        return kExitConfig;
    }
    if (!paramsPath.empty()) config.paramsPath = paramsPath;
    if (!outDir.empty()) config.outDir = outDir;

    const RunResult result = run(config);
    if (result.exitStatus == kExitOk) {
        std::cout << result.message << '\n';
    } else {
        std::cerr << "ldosim: " << result.message << '\n';
    }
    if (result.exitStatus == kExitOk || result.exitStatus == kExitAcceptance)
        for (const auto& a : result.artifacts)
            if (!a.name.ends_with(".meta.json")) std::cout << "  wrote " << a.name << '\n';
    if (!result.comparison.empty())
        for (const auto& row : result.comparison)
            if (!row.pass) std::cerr << "  FAIL " << row.quantity << '\n';
    return result.exitStatus;
}
