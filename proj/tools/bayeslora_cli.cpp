// Copyright (c) 2026, The bayeslora authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end over the C API.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "bayeslora/bayeslora.h"

namespace {

struct Failure {
    bl_status status;
};

void check(bl_status s) {
    if (s != BL_OK) throw Failure{s};
}

std::string take(char* s) {
    std::string out = s ? s : "";
    bl_string_free(s);
    return out;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

using ConfigPtr = std::unique_ptr<bl_config, decltype(&bl_config_free)>;
using SummaryPtr = std::unique_ptr<bl_summary, decltype(&bl_summary_free)>;

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string data;
    std::string output_dir;
    std::string method;
    std::string seeds;
    std::size_t rank = 0;

    void add_to(CLI::App* app, bool run_flags) {
        app->add_option("--config", config_path, "ini configuration file")->check(CLI::ExistingFile);
        app->add_option("--set", overrides, "override as section.key=value (repeatable)");
        app->add_option("--data", data, "protein pair TSV (default: synthetic data)");
        app->add_option("--rank", rank, "LoRA rank");
        if (run_flags) {
            app->add_option("--method", method, "single, ensemble or bayesian");
            app->add_option("--seeds", seeds, "comma-separated run seeds");
            app->add_option("--output-dir", output_dir, "root directory for run artifacts");
        }
    }

    ConfigPtr build() const {
        bl_config* raw = nullptr;
        check(config_path.empty() ? bl_config_new(&raw) : bl_config_load(config_path.c_str(), &raw));
        ConfigPtr c(raw, &bl_config_free);
        auto set = [&](const std::string& a) { check(bl_config_set(c.get(), a.c_str())); };
        if (!data.empty()) set("data.tsv=" + data);
        if (rank) set("adapter.rank=" + std::to_string(rank));
        if (!method.empty()) set("run.method=" + method);
        if (!seeds.empty()) set("run.seeds=" + seeds);
        if (!output_dir.empty()) set("run.output_dir=" + output_dir);
        for (const auto& o : overrides) set(o);
        check(bl_config_validate(c.get()));
        return c;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LoRA fine-tuning with ensembles and Laplace posteriors"};
    app.set_version_flag("--version", std::string(bl_version()));
    app.require_subcommand(1);

    CommonOptions common;
    std::string out;
    std::uint64_t seed = 1;

    auto* show = app.add_subcommand("config", "print the resolved configuration as ini text");
    common.add_to(show, true);

    auto* gen = app.add_subcommand("gen-data", "write the synthetic interaction dataset as TSV");
    common.add_to(gen, false);
    gen->add_option("--out", out, "output TSV")->required();

    std::string loss;
    auto* train = app.add_subcommand("train", "train one LoRA adapter set");
    common.add_to(train, false);
    train->add_option("--seed", seed, "training seed");
    train->add_option("--out", out, "model checkpoint")->required();
    train->add_option("--loss", loss, "loss log CSV");

    auto* train_ens = app.add_subcommand("train-ensemble", "train a LoRA ensemble");
    common.add_to(train_ens, false);
    train_ens->add_option("--seed", seed, "base seed; member seeds are derived from it");
    train_ens->add_option("--out", out, "ensemble checkpoint")->required();

    std::string model;
    auto* fit = app.add_subcommand("laplace-fit", "fit a K-FAC Laplace posterior around a model");
    common.add_to(fit, false);
    fit->add_option("--model", model, "model checkpoint")->required()->check(CLI::ExistingFile);
    fit->add_option("--out", out, "posterior checkpoint")->required();

    std::string checkpoint;
    std::string out_dir = ".";
    auto* eval = app.add_subcommand("evaluate", "score a checkpoint on the test split");
    common.add_to(eval, false);
    eval->add_option("--checkpoint", checkpoint, "model, ensemble or posterior checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--seed", seed, "predictive sampling seed");
    eval->add_option("--out-dir", out_dir, "directory for predictions.tsv, metrics.txt, reliability.csv");

    auto* run = app.add_subcommand("run", "train and evaluate one method over all seeds");
    common.add_to(run, true);

    std::vector<std::size_t> ranks;
    auto* sweep = app.add_subcommand("sweep-rank", "run every method at several ranks");
    common.add_to(sweep, true);
    sweep->add_option("--ranks", ranks, "ranks to sweep (default 8 16 32)")->delimiter(',');

    std::string summary_a, summary_b, metric = "nll", alternative = "greater";
    auto* compare = app.add_subcommand("compare", "one-sided Welch test between two run summaries");
    compare->add_option("summary_a", summary_a, "first summary.txt")->required();
    compare->add_option("summary_b", summary_b, "second summary.txt")->required();
    compare->add_option("--metric", metric, "metric name");
    compare->add_option("--alternative", alternative, "greater or less (mean of A relative to B)")
        ->check(CLI::IsMember({"greater", "less"}));

    std::string predictions, column = "auto";
    std::size_t bins = 15;
    auto* rel = app.add_subcommand("reliability", "reliability CSV from a prediction dump");
    rel->add_option("--predictions", predictions, "predictions.tsv")->required();
    rel->add_option("--bins", bins, "number of equal-width bins");
    rel->add_option("--out", out, "output CSV")->required();
    rel->add_option("--column", column, "probability column")->check(CLI::IsMember({"auto", "map", "bayes", "ens"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (show->parsed()) {
            char* text = nullptr;
            check(bl_config_to_text(common.build().get(), &text));
            std::cout << take(text);
        } else if (gen->parsed()) {
            check(bl_generate_data(common.build().get(), out.c_str()));
            std::cout << "wrote " << out << "\n";
        } else if (train->parsed()) {
            check(bl_train(common.build().get(), seed, out.c_str(), loss.empty() ? nullptr : loss.c_str()));
            std::cout << "wrote " << out << "\n";
        } else if (train_ens->parsed()) {
            check(bl_train_ensemble(common.build().get(), seed, out.c_str()));
            std::cout << "wrote " << out << "\n";
        } else if (fit->parsed()) {
            check(bl_laplace_fit(common.build().get(), model.c_str(), out.c_str()));
            std::cout << "wrote " << out << "\n";
        } else if (eval->parsed()) {
            std::filesystem::create_directories(out_dir);
            const std::string metrics = out_dir + "/metrics.txt";
            check(bl_evaluate(common.build().get(), checkpoint.c_str(), seed, (out_dir + "/predictions.tsv").c_str(),
                              metrics.c_str(), (out_dir + "/reliability.csv").c_str()));
            std::cout << slurp(metrics);
        } else if (run->parsed()) {
            const ConfigPtr c = common.build();
            bl_summary* raw = nullptr;
            check(bl_run(c.get(), &raw));
            const SummaryPtr s(raw, &bl_summary_free);
            char* text = nullptr;
            check(bl_summary_to_text(s.get(), &text));
            char* dir = nullptr;
            check(bl_config_run_directory(c.get(), &dir));
            std::cout << take(text) << "\nrun directory: " << take(dir) << "\n";
        } else if (sweep->parsed()) {
            char* table = nullptr;
            check(bl_sweep_rank(common.build().get(), ranks.data(), ranks.size(), &table));
            std::cout << take(table);
        } else if (compare->parsed()) {
            char* report = nullptr;
            int significant = 0;
            check(bl_compare(summary_a.c_str(), summary_b.c_str(), metric.c_str(),
                             alternative == "greater" ? BL_GREATER : BL_LESS, &report, &significant));
            std::cout << take(report);
        } else if (rel->parsed()) {
            check(bl_reliability(predictions.c_str(), bins, out.c_str(), column.c_str()));
            std::cout << slurp(out);
        }
    } catch (const Failure& f) {
        std::cerr << "error: " << bl_last_error_message() << "\n";
        return static_cast<int>(f.status);
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return BL_ERR_IO;
    }
    return 0;
}
