#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "ssmred/commands.hpp"
#include "ssmred/error.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"Train, reduce and evaluate deep LRU state-space models"};
    app.require_subcommand(1);

    std::string config_path;
    std::string data_dir;
    std::string checkpoint;
    std::string out_dir = ".";
    std::string method_name;
    std::size_t order = 0;
    std::optional<std::uint64_t> seed;

    auto add_config = [&](CLI::App* c) { c->add_option("--config", config_path, "key = value config file"); };
    auto add_seed = [&](CLI::App* c) { c->add_option("--seed", seed, "overrides the config seed"); };

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    add_config(gen);
    add_seed(gen);
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* fit = app.add_subcommand("fit", "train a model on DATA/train");
    add_config(fit);
    add_seed(fit);
    fit->add_option("--data", data_dir, "dataset directory")->required();
    fit->add_option("--checkpoint", checkpoint, "initial model");
    fit->add_option("--out", out_dir, "output directory")->required();

    auto* eval = app.add_subcommand("eval", "score a model on DATA/test");
    add_config(eval);
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_option("--checkpoint", checkpoint, "model file")->required();
    eval->add_option("--out", out_dir, "also write metrics.json here");

    auto* reduce = app.add_subcommand("reduce", "reduce every layer of a model");
    add_config(reduce);
    reduce->add_option("--checkpoint", checkpoint, "model file")->required();
    reduce->add_option("--method", method_name, "mt, msp, bt or bsp")
        ->required()
        ->check(CLI::IsMember({"mt", "msp", "bt", "bsp"}));
    reduce->add_option("--order", order, "retained states per layer")->required();
    reduce->add_option("--out", out_dir, "output directory")->required();

    auto* sweep = app.add_subcommand("sweep", "score reduced models on DATA/test for every order and method");
    add_config(sweep);
    sweep->add_option("--data", data_dir, "dataset directory")->required();
    sweep->add_option("--checkpoint", checkpoint, "model file")->required();
    sweep->add_option("--out", out_dir, "output directory")->required();

    auto* grad = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
    add_config(grad);
    add_seed(grad);

    CLI11_PARSE(app, argc, argv);

    try {
        ssmred::ExperimentConfig cfg;
        if (!config_path.empty()) cfg = ssmred::load_config(config_path);
        if (seed) cfg.train.seed = *seed;
        const auto s = cfg.train.seed;
        if (gen->parsed()) return ssmred::cmd_gen_data(cfg, s, out_dir, std::cout);
        if (fit->parsed())
            return ssmred::cmd_fit(cfg, data_dir, checkpoint.empty() ? std::nullopt : std::optional<fs::path>(checkpoint),
                                   out_dir, std::cout);
        if (eval->parsed())
            return ssmred::cmd_eval(cfg, data_dir, checkpoint,
                                    eval->count("--out") ? std::optional<fs::path>(out_dir) : std::nullopt, std::cout);
        if (reduce->parsed())
            return ssmred::cmd_reduce(cfg, checkpoint, ssmred::parse_reduction_method(method_name), order, out_dir,
                                      std::cout);
        if (sweep->parsed()) return ssmred::cmd_sweep(cfg, data_dir, checkpoint, out_dir, std::cout);
        if (grad->parsed()) return ssmred::cmd_gradcheck(cfg, s, std::cout);
    } catch (const ssmred::Error& e) {
        std::cerr << "error " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
