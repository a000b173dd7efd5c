#include "tcast/synthetic.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Write a seeded synthetic station network in the five-table CSV layout"};
    tcast::SyntheticConfig config;
    std::string out = "data/fixture";
    app.add_option("--out", out, "output directory");
    app.add_option("--stations", config.stations, "number of stations");
    app.add_option("--nccs", config.nccs, "how many of them are N-CCS");
    app.add_option("--days", config.days, "days of 15-minute flows");
    app.add_option("--sensors", config.sensors, "weather sensors");
    app.add_option("--seed", config.seed, "random seed");
    app.add_flag("--constant", config.constant_flows, "constant flows at every station");
    CLI11_PARSE(app, argc, argv);
    try {
        tcast::write_synthetic_dataset(out, config);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}
