#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

// Engine headers first: httplib pulls in <resolv.h>, whose `_res` macro breaks Eigen.
#include "recourse/datasets.hpp"
#include "recourse/errors.hpp"
#include "recourse/experiment.hpp"
#include "recourse/recourse_search.hpp"
#include "recourse/service.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_config = 2;
constexpr int exit_infeasible = 3;

// Factual files hold `id=value` tokens separated by whitespace; `#` starts a comment.
recourse::row read_factual(const recourse::scm& m, const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw recourse::config_error("cannot read factual file '" + path + "'");
    }
    recourse::row x(m.size(), recourse::missing_value);
    std::string line;
    while (std::getline(in, line)) {
        line = line.substr(0, line.find('#'));
        std::istringstream tokens(line);
        for (std::string tok; tokens >> tok;) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) {
                throw recourse::config_error("factual token '" + tok + "' is not of the form id=value");
            }
            const auto idx = m.find(tok.substr(0, eq));
            if (!idx) {
                throw recourse::config_error("factual names unknown node '" + tok.substr(0, eq) + "'");
            }
            if (*idx == m.target()) {
                continue;
            }
            try {
                x[*idx] = std::stod(tok.substr(eq + 1));
            } catch (const std::logic_error&) {
                throw recourse::config_error("factual value '" + tok + "' is not a number");
            }
        }
    }
    for (std::size_t c : m.covariates()) {
        if (std::isnan(x[c])) {
            throw recourse::config_error("factual is missing covariate '" + m.id(c) + "'");
        }
        if (!m.value_allowed(c, x[c])) {
            throw recourse::config_error("factual value of '" + m.id(c) + "' is outside its domain");
        }
    }
    return x;
}

int run_command(const std::string& config_path) {
    const recourse::run_config cfg = recourse::load_run_config(config_path);
    const recourse::experiment_report rep = recourse::run_experiment(cfg);
    std::cout << recourse::report_table(rep);
    std::fprintf(stdout, "elapsed %.1f s, confidence cache %zu hits / %zu misses\n", rep.seconds, rep.cache_hits,
                 rep.cache_misses);
    if (!cfg.output.csv.empty()) recourse::export_report(rep, recourse::report_format::csv, cfg.output.csv);
    if (!cfg.output.table.empty()) recourse::export_report(rep, recourse::report_format::table_text, cfg.output.table);
    if (!cfg.output.plot.empty()) recourse::export_report(rep, recourse::report_format::plot_data, cfg.output.plot);
    bool any_feasible = false;
    for (const auto& r : rep.rows) {
        any_feasible = any_feasible || r.infeasible < r.recommendations;
    }
    return any_feasible ? exit_ok : exit_infeasible;
}

struct recommend_args {
    std::string dataset;
    std::string method = "ICR-ind";
    double confidence = 0.9;
    std::string factual;
    std::uint64_t seed = 0;
    std::string preset = "desk";
    bool as_json = false;
};

int recommend_command(const recommend_args& args) {
    const recourse::dataset_spec d = recourse::load_dataset(args.dataset);
    const recourse::method m = recourse::parse_method(args.method);
    recourse::optimizer_config opt;
    if (args.preset == "paper") {
        opt.population = d.paper_optimizer.population;
        opt.generations = d.paper_optimizer.generations;
    } else if (args.preset != "desk") {
        throw recourse::config_error("unknown optimizer preset '" + args.preset + "' (expected desk or paper)");
    }
    const recourse::environment env = recourse::dataset_environment(d, opt, args.seed);
    recourse::row x;
    if (args.factual.empty()) {
        x = recourse::covariates_only(
            *d.model, recourse::sample_rejected(*d.model, *env.deployed, d.threshold, 1, args.seed).rows.front());
    } else {
        x = read_factual(*d.model, args.factual);
        x[d.model->target()] = recourse::missing_value;
    }
    if (recourse::accepted(*env.deployed, x, d.threshold)) {
        throw recourse::config_error("the deployed predictor already accepts this factual");
    }
    const recourse::confidence_evaluator eval(env, x, 0, args.seed);
    const recourse::recommendation rec = recourse::optimize(eval, {m, args.confidence}, args.seed);
    nlohmann::json out = {{"dataset", d.name},
                          {"method", std::string(recourse::to_string(m))},
                          {"target", recourse::round6(rec.target)},
                          {"cost", recourse::round6(rec.cost)},
                          {"confidence", recourse::round6(rec.confidence)},
                          {"feasible", rec.feasible}};
    nlohmann::json factual = nlohmann::json::object();
    for (std::size_t c : d.model->covariates()) factual[d.model->id(c)] = recourse::round6(x[c]);
    nlohmann::json act = nlohmann::json::object();
    for (const auto& it : rec.act.items()) act[d.model->id(it.node)] = recourse::round6(it.value);
    out["factual"] = factual;
    out["action"] = act;
    if (args.as_json) {
        std::cout << out.dump(2) << "\n";
    } else {
        std::cout << "dataset     " << d.name << "\nfactual     " << factual.dump() << "\nmethod      "
                  << recourse::to_string(m) << " (target " << rec.target << ")\naction      " << act.dump()
                  << "\ncost        " << rec.cost << "\nconfidence  " << rec.confidence << "\nfeasible    "
                  << (rec.feasible ? "yes" : "no") << "\n";
    }
    return rec.feasible ? exit_ok : exit_infeasible;
}

int list_command(bool audit) {
    for (const auto& name : recourse::dataset_names()) {
        const recourse::dataset_spec d = recourse::load_dataset(name);
        if (audit) {
            std::cout << recourse::equation_audit(d) << "\n";
        } else {
            std::cout << name << "\t" << d.description << "\n";
        }
    }
    return exit_ok;
}

httplib::Server* active_server = nullptr;

int serve_command(const std::string& host, int port, const std::string& ui) {
    recourse::service_options opts;
    opts.ui_directory = ui;
    recourse::recourse_service service(opts);
    httplib::Server server;
    service.bind(server);
    active_server = &server;
    std::signal(SIGINT, [](int) { active_server->stop(); });
    std::signal(SIGTERM, [](int) { active_server->stop(); });
    std::cerr << "listening on " << host << ":" << port << "\n";
    if (!server.listen(host, port)) {
        std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
        return exit_failure;
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Causal recourse lab: counterfactual explanations, causal recourse and improvement-focused recourse"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "Run an experiment described by a run-config file");
    run->add_option("--config", config_path, "Run-config file (INI)")->required();

    recommend_args rargs;
    auto* rec = app.add_subcommand("recommend", "Recommend an action for one rejected individual");
    rec->add_option("--dataset", rargs.dataset, "Bundled dataset name")->required();
    rec->add_option("--method", rargs.method, "CE, CR-ind, CR-sub, ICR-ind or ICR-sub");
    rec->add_option("--confidence", rargs.confidence, "Confidence target in (0.5, 1]");
    rec->add_option("--factual", rargs.factual, "File with id=value covariates; sampled when omitted");
    rec->add_option("--seed", rargs.seed, "Seed");
    rec->add_option("--preset", rargs.preset, "Optimizer preset: desk or paper");
    rec->add_flag("--json", rargs.as_json, "Print JSON");

    bool audit = false;
    auto* list = app.add_subcommand("list-datasets", "List bundled datasets");
    list->add_flag("--audit", audit, "Print the structural equations");

    std::string host = "127.0.0.1";
    int port = 8080;
    std::string ui;
    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port");
    serve->add_option("--ui", ui, "Directory of static explorer assets served under /ui");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (*run) return run_command(config_path);
        if (*rec) return recommend_command(rargs);
        if (*list) return list_command(audit);
        if (*serve) return serve_command(host, port, ui);
    } catch (const recourse::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const recourse::unknown_dataset_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_failure;
    }
    return exit_failure;
}
