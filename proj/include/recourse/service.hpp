#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "recourse/datasets.hpp"
#include "recourse/errors.hpp"
#include "recourse/experiment.hpp"
#include "recourse/post_recourse.hpp"
#include "recourse/random.hpp"
#include "recourse/recourse_search.hpp"
#include "recourse/scm_io.hpp"
#include "recourse/subpopulation.hpp"

// After the engine headers: httplib pulls in <resolv.h>, whose `_res` macro breaks Eigen.
#include <httplib.h>

namespace recourse {

using json = nlohmann::json;

/// Decimal with 6 significant digits.
inline double round6(double x) {
    if (!std::isfinite(x)) return x;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return std::strtod(buf, nullptr);
}

inline json number6(double x) {
    if (std::isnan(x)) return nullptr;
    return round6(x);
}

struct http_reply {
    int status = 200;
    json body;
};

class http_error : public recourse_error {
public:
    http_error(int status, const std::string& what, json detail = json::object())
        : recourse_error(what), status_(status), detail_(std::move(detail)) {}
    [[nodiscard]] int status() const noexcept { return status_; }
    [[nodiscard]] const json& detail() const noexcept { return detail_; }

private:
    int status_;
    json detail_;
};

struct service_options {
    std::chrono::seconds session_ttl{3600};
    optimizer_config optimizer;
    /// Directory with the explorer's static assets, served under /ui when set.
    std::string ui_directory;
};

/// One explainee: the dataset environment, a rejected factual and the
/// evaluator bound to its seed.
struct session {
    std::string id;
    std::string dataset;
    std::uint64_t seed = 0;
    row factual;
    double score = 0.0;
    dataset_spec spec;
    std::unique_ptr<environment> env;
    std::unique_ptr<confidence_evaluator> eval;
    std::chrono::steady_clock::time_point last_used;
    std::mutex mutex;
};

/// Routes requests to the engine. `handle` is transport independent;
/// `bind` attaches it to an HTTP server.
class recourse_service {
public:
    explicit recourse_service(service_options opts = {}) : opts_(std::move(opts)) {}

    http_reply handle(const std::string& verb, const std::string& path, const std::string& body) {
        try {
            evict_expired();
            if (verb == "GET" && path == "/healthz") return {200, "ok"};
            if (verb == "GET" && path == "/datasets") return {200, datasets()};
            if (verb == "POST" && path == "/sessions") return {201, create_session(parse_body(body))};
            const std::string prefix = "/sessions/";
            if (path.rfind(prefix, 0) == 0) {
                const std::string rest = path.substr(prefix.size());
                const auto slash = rest.find('/');
                const std::string id = rest.substr(0, slash);
                const std::string op = slash == std::string::npos ? "" : rest.substr(slash + 1);
                auto s = find_session(id);
                std::lock_guard lock(s->mutex);
                s->last_used = std::chrono::steady_clock::now();
                if (verb == "GET" && op.empty()) return {200, describe(*s)};
                if (verb == "POST" && op == "evaluate") return {200, evaluate(*s, parse_body(body))};
                if (verb == "POST" && op == "recommend") return {200, recommend(*s, parse_body(body))};
            }
            return {404, {{"error", "no route for " + verb + " " + path}}};
        } catch (const http_error& e) {
            json b = {{"error", e.what()}};
            b.update(e.detail());
            return {e.status(), b};
        } catch (const unknown_dataset_error& e) {
            return {404, {{"error", e.what()}}};
        } catch (const recourse_error& e) {
            return {422, {{"error", e.what()}}};
        } catch (const std::invalid_argument& e) {
            return {422, {{"error", e.what()}}};
        } catch (const json::exception& e) {
            return {422, {{"error", std::string("malformed request: ") + e.what()}}};
        }
    }

    [[nodiscard]] std::size_t session_count() const {
        std::lock_guard lock(sessions_mutex_);
        return sessions_.size();
    }

    /// Registers the routes on `server`.
    void bind(httplib::Server& server) {
        auto route = [this](const httplib::Request& req, httplib::Response& res) {
            const http_reply r = handle(req.method, req.path, req.body);
            res.status = r.status;
            if (r.body.is_string()) {
                res.set_content(r.body.get<std::string>(), "text/plain");
            } else {
                res.set_content(r.body.dump(), "application/json");
            }
        };
        server.Get("/healthz", route);
        server.Get("/datasets", route);
        server.Post("/sessions", route);
        server.Get(R"(/sessions/[^/]+)", route);
        server.Post(R"(/sessions/[^/]+/(evaluate|recommend))", route);
        if (!opts_.ui_directory.empty()) {
            server.set_mount_point("/ui", opts_.ui_directory);
        }
    }

private:
    static json parse_body(const std::string& body) {
        if (body.empty()) return json::object();
        json j = json::parse(body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw http_error(422, "request body must be a JSON object");
        }
        return j;
    }

    static json dataset_descriptor(const dataset_spec& d) {
        const scm& m = *d.model;
        json nodes = json::array();
        const node_set causes = m.causes_of_target();
        for (std::size_t j = 0; j < m.size(); ++j) {
            const node_spec& s = m.spec(j);
            json n = {{"id", s.id},
                      {"parents", s.parents},
                      {"kind", detail::to_string(s.kind)},
                      {"domain", detail::to_string(s.domain)},
                      {"target", j == m.target()},
                      {"actionable", s.actionable && j != m.target()},
                      {"cause_of_target", causes.contains(j)},
                      {"cost", number6(s.cost_weight)}};
            if (s.domain == value_domain::categorical) n["categories"] = s.categories;
            if (s.decimals >= 0) n["decimals"] = s.decimals;
            nodes.push_back(std::move(n));
        }
        json edges_json = json::array();
        for (const auto& [p, c] : edges(m)) edges_json.push_back({p, c});
        return {{"name", d.name},
                {"description", d.description},
                {"target", m.target_id()},
                {"threshold", number6(d.threshold)},
                {"predictor", std::string(to_string(d.predictor.kind))},
                {"nodes", nodes},
                {"edges", edges_json}};
    }

    static json datasets() {
        json out = json::array();
        for (const auto& name : dataset_names()) out.push_back(dataset_descriptor(load_dataset(name)));
        return out;
    }

    static json factual_json(const scm& m, const row& x) {
        json out = json::object();
        for (std::size_t j : m.covariates()) out[m.id(j)] = number6(x[j]);
        return out;
    }

    static row factual_from_json(const scm& m, const json& j) {
        if (!j.is_object()) throw http_error(422, "factual must be an object of covariate values");
        row x(m.size(), missing_value);
        for (const auto& [key, value] : j.items()) {
            const auto idx = m.find(key);
            if (!idx) throw http_error(422, "unknown covariate '" + key + "'");
            if (*idx == m.target()) throw http_error(422, "the factual must not include the target '" + key + "'");
            if (!value.is_number()) throw http_error(422, "value of '" + key + "' must be a number");
            x[*idx] = value.get<double>();
        }
        for (std::size_t c : m.covariates()) {
            if (std::isnan(x[c])) throw http_error(422, "factual is missing covariate '" + m.id(c) + "'");
            if (!m.value_allowed(c, x[c])) throw http_error(422, "value of '" + m.id(c) + "' is outside its domain");
        }
        return x;
    }

    action action_from_json(const scm& m, const json& j) const {
        if (!j.is_object()) throw http_error(422, "action must be an object mapping covariates to values");
        std::vector<intervention> items;
        for (const auto& [key, value] : j.items()) {
            const auto idx = m.find(key);
            if (!idx) throw http_error(422, "unknown covariate '" + key + "'");
            if (!value.is_number()) throw http_error(422, "value of '" + key + "' must be a number");
            if (*idx != m.target() && !m.spec(*idx).actionable) {
                throw http_error(422, "'" + key + "' is not actionable");
            }
            items.push_back({*idx, snap_value(m, *idx, value.get<double>(), opts_.optimizer.decimals)});
        }
        action a(std::move(items));
        m.validate(a);
        return a;
    }

    static json action_json(const scm& m, const action& a) {
        json out = json::object();
        for (const auto& it : a.items()) out[m.id(it.node)] = number6(it.value);
        return out;
    }

    json create_session(const json& req) {
        const std::string name = req.at("dataset").get<std::string>();
        const std::uint64_t seed = req.value("seed", std::uint64_t{0});
        auto s = std::make_unique<session>();
        s->spec = load_dataset(name);
        s->dataset = name;
        s->seed = seed;
        const scm& m = *s->spec.model;
        s->env = std::make_unique<environment>(dataset_environment(s->spec, opts_.optimizer, seed));
        const auto& deployed = s->env->deployed;
        if (req.contains("factual")) {
            s->factual = factual_from_json(m, req.at("factual"));
            try {
                (void)scm_oracle_score(m, s->factual);
            } catch (const infeasible_observation_error& e) {
                throw http_error(422, e.what());
            }
            if (accepted(*deployed, s->factual, s->spec.threshold)) {
                throw http_error(409, "the deployed predictor already accepts this factual; recourse is not needed",
                                 {{"score", number6(deployed->score(s->factual))},
                                  {"threshold", number6(s->spec.threshold)}});
            }
        } else {
            s->factual = covariates_only(m, sample_rejected(m, *deployed, s->spec.threshold, 1, seed).rows.front());
        }
        s->score = deployed->score(s->factual);
        s->eval = std::make_unique<confidence_evaluator>(*s->env, s->factual, 0, seed);
        s->last_used = std::chrono::steady_clock::now();
        std::lock_guard lock(sessions_mutex_);
        s->id = session_id(seed);
        json out = describe(*s);
        std::string id = s->id;
        sessions_.emplace(std::move(id), std::shared_ptr<session>(std::move(s)));
        return out;
    }

    std::string session_id(std::uint64_t seed) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "s%016llx",
                      static_cast<unsigned long long>(splitmix64(seed ^ splitmix64(++counter_))));
        return buf;
    }

    static json describe(const session& s) {
        const scm& m = *s.spec.model;
        return {{"id", s.id},
                {"dataset", s.dataset},
                {"seed", s.seed},
                {"factual", factual_json(m, s.factual)},
                {"score", number6(s.score)},
                {"observational_confidence", number6(s.eval->observational_confidence())},
                {"threshold", number6(s.spec.threshold)},
                {"predictor", std::string(to_string(s.env->deployed->kind()))}};
    }

    std::shared_ptr<session> find_session(const std::string& id) {
        std::lock_guard lock(sessions_mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw http_error(404, "unknown or expired session '" + id + "'");
        return it->second;
    }

    void evict_expired() {
        const auto now = std::chrono::steady_clock::now();
        std::lock_guard lock(sessions_mutex_);
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            std::unique_lock session_lock(it->second->mutex, std::try_to_lock);
            if (session_lock.owns_lock() && now - it->second->last_used > opts_.session_ttl) {
                session_lock.unlock();
                it = sessions_.erase(it);
            } else {
                ++it;
            }
        }
    }

    json evaluate(const session& s, const json& req) const {
        const scm& m = *s.spec.model;
        const action a = action_from_json(m, req.contains("action") ? req.at("action") : json::object());
        const action_assessment r = assess(*s.eval, a);
        const bool on_cause = acts_on_cause(m, a);
        const double h_star = r.observational_confidence;
        const double gamma_ind = on_cause ? r.gamma_ind : h_star;
        json out = {{"action", action_json(m, a)},
                    {"cost", number6(r.cost)},
                    {"gamma_ind", number6(gamma_ind)},
                    {"gamma_sub", number6(r.gamma_sub.value_or(h_star))},
                    {"not_a_cause", !on_cause},
                    {"observational_confidence", number6(h_star)},
                    {"eta_under_h", number6(r.eta_ind)},
                    {"eta_under_h_sub", number6(r.eta_sub)},
                    {"eta_under_h_ind", number6(r.eta_h_ind)},
                    {"acceptance_bound", number6(acceptance_lower_bound(gamma_ind, s.spec.threshold))},
                    {"subgroup", subgroup(m, a)},
                    {"samples", s.env->optimizer.samples}};
        return out;
    }

    /// Covariates shared with the explainee's subgroup: those the action cannot affect.
    static json subgroup(const scm& m, const action& a) {
        json out = json::array();
        const node_set shared = m.nondescendants(a.targets());
        for (std::size_t j : m.covariates()) {
            if (shared.contains(j) && !a.targets().contains(j)) out.push_back(m.id(j));
        }
        return out;
    }

    json recommend(session& s, const json& req) const {
        const scm& m = *s.spec.model;
        const method meth = parse_method(req.at("method").get<std::string>());
        const double target = req.value("confidence", 0.9);
        if (meth != method::ce && !(target > 0.5 && target <= 1.0)) {
            throw http_error(422, "confidence must lie in (0.5, 1]");
        }
        optimizer_config cfg = s.env->optimizer;
        if (req.contains("optimizer_preset")) {
            const json& p = req.at("optimizer_preset");
            if (p.is_string()) {
                const std::string name = p.get<std::string>();
                if (name == "paper") {
                    cfg.population = s.spec.paper_optimizer.population;
                    cfg.generations = s.spec.paper_optimizer.generations;
                } else if (name != "desk") {
                    throw http_error(422, "unknown optimizer preset '" + name + "' (expected desk or paper)");
                }
            } else if (p.is_object()) {
                cfg.population = p.value("population", cfg.population);
                cfg.generations = p.value("generations", cfg.generations);
                cfg.crossover_probability = p.value("crossover", cfg.crossover_probability);
                cfg.mutation_probability = p.value("mutation", cfg.mutation_probability);
            } else {
                throw http_error(422, "optimizer_preset must be a name or an object");
            }
            if (cfg.population < 2) throw http_error(422, "population must be at least 2");
        }
        const std::uint64_t seed = req.value("seed", s.seed);
        recommendation rec;
        if (cfg.population == s.env->optimizer.population && cfg.generations == s.env->optimizer.generations &&
            cfg.crossover_probability == s.env->optimizer.crossover_probability &&
            cfg.mutation_probability == s.env->optimizer.mutation_probability) {
            rec = optimize(*s.eval, {meth, target}, seed);
        } else {
            environment env = *s.env;
            env.optimizer = cfg;
            const confidence_evaluator eval(env, s.factual, 0, s.seed);
            rec = optimize(eval, {meth, target}, seed);
        }
        json out = {{"method", std::string(to_string(meth))},
                    {"target", number6(rec.target)},
                    {"action", action_json(m, rec.act)},
                    {"cost", number6(rec.cost)},
                    {"confidence", number6(rec.confidence)},
                    {"feasible", rec.feasible},
                    {"evaluations", rec.evaluations},
                    {"subgroup", subgroup(m, rec.act)},
                    {"guarantee", guarantee(m, meth, rec, s.spec.threshold)}};
        if (!rec.feasible) {
            out["violation"] = number6(std::max(0.0, rec.target - rec.confidence));
        }
        return out;
    }

    static std::string describe_action(const scm& m, const action& a) {
        if (a.empty()) return "doing nothing";
        std::string out;
        for (const auto& it : a.items()) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6g", it.value);
            out += (out.empty() ? "setting " : " and ") + m.id(it.node) + " to " + buf;
        }
        return out;
    }

    static std::string percent(double p) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.0f%%", 100.0 * p);
        return buf;
    }

    /// Plain-language statement of what the recommendation promises.
    static std::string guarantee(const scm& m, method meth, const recommendation& rec, double t) {
        if (!rec.feasible) {
            return "No action within the search budget reaches the requested confidence.";
        }
        const std::string act = describe_action(m, rec.act);
        std::string group;
        json shared = subgroup(m, rec.act);
        for (std::size_t k = 0; k < shared.size(); ++k) {
            group += (k == 0 ? "" : (k + 1 == shared.size() ? " and " : ", ")) + shared[k].get<std::string>();
        }
        const std::string who = group.empty() ? "Across the whole population"
                                              : "Within a group of individuals that share your " + group;
        switch (meth) {
        case method::ce:
            return "Changing the reported features by " + act +
                   " flips the current decision; no statement is made about the underlying outcome.";
        case method::cr_ind:
            return "For individuals with exactly your observed characteristics, " + act +
                   " leads to acceptance with probability at least " + percent(rec.confidence) + ".";
        case method::cr_sub:
            return who + ", " + act + " leads to acceptance with probability at least " + percent(rec.confidence) + ".";
        case method::icr_ind:
            return "For individuals with exactly your observed characteristics, " + act +
                   " improves the outcome with probability at least " + percent(rec.confidence) +
                   " and leads to acceptance with probability at least " +
                   percent(acceptance_lower_bound(rec.confidence, t)) + ".";
        case method::icr_sub:
            return who + ", " + act + " improves the outcome with probability at least " + percent(rec.confidence) +
                   " and leads to acceptance with probability at least " +
                   percent(acceptance_lower_bound(rec.confidence, t)) + ".";
        }
        return {};
    }

    service_options opts_;
    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<session>> sessions_;
    std::uint64_t counter_ = 0;
};

} // namespace recourse
