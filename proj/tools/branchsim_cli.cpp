// branchsim: batch experiments, reports and the HTTP service over one store.
//
// exit codes: 0 ok, 1 some node failed, 2 any other error.

#include "branchsim/json_io.hpp"
#include "branchsim/operations.hpp"
#include "branchsim/service.hpp"

#include "CLI11.hpp"
#include "httplib.h"

#include <fstream>
#include <iostream>
#include <sstream>

using namespace branchsim;
using json = nlohmann::json;

namespace
{
    struct Options
    {
        std::string config;
        std::string store;
        std::size_t workers = 0; // 0: take max_workers from the config
        std::optional<std::int64_t> until;
        std::uint64_t node = 0;
        std::string format = "json";
        std::int64_t from = 0;
        std::int64_t to = 0;
        std::int64_t at = 0;
        std::string overrides;
        std::string host = "127.0.0.1";
        int port = 8080;
    };

    // Inline JSON, or @path to read it from a file.
    ParamOverrides read_overrides(const std::string &text)
    {
        if (text.empty())
            return {};
        std::string body = text;
        if (body.front() == '@')
        {
            std::ifstream in(body.substr(1));
            if (!in)
                fail(ErrorCode::InvalidConfig, "cannot read " + body.substr(1));
            std::stringstream buf;
            buf << in.rdbuf();
            body = buf.str();
        }
        try
        {
            return overrides_from_json(json::parse(body));
        }
        catch (const json::parse_error &e)
        {
            fail(ErrorCode::InvalidConfig, std::string("overrides: ") + e.what());
        }
    }

    void print_report(const json &report, const std::string &format)
    {
        if (format == "table")
            std::cout << render_report_table(report);
        else
            std::cout << report.dump(2) << '\n';
    }

    int cmd_predict(const Options &o)
    {
        ScenarioConfig config = load_config(o.config);
        if (o.until)
            config.horizon = *o.until;
        auto ws = create_workspace(config, o.store);
        const PredictResult r = predict(*ws, config, o.workers ? o.workers : config.max_workers);
        if (!r.failed.empty())
        {
            json failed = json::array();
            for (NodeId id : r.failed)
                failed.push_back(node_to_json(ws->tree().get(id)));
            std::cout << json{{"failed", failed}}.dump(2) << '\n';
            return 1;
        }
        print_report(build_report(*ws, config.observation), o.format);
        return 0;
    }

    int cmd_run(const Options &o)
    {
        auto ws = Workspace::open(o.store);
        if (!o.until)
            fail(ErrorCode::InvalidRange, "--until is required");
        const std::size_t workers = o.workers ? o.workers : 1;
        if (o.node)
            ws->engine().run_targets({{static_cast<NodeId>(o.node), *o.until}}, workers);
        else
            ws->engine().run_tree(*o.until, workers);
        ws->save();
        json nodes = json::array();
        bool failed = false;
        for (const auto &n : ws->tree().nodes())
        {
            failed = failed || n.status == NodeStatus::failed;
            nodes.push_back(node_to_json(n));
        }
        std::cout << json{{"nodes", nodes}}.dump(2) << '\n';
        return failed ? 1 : 0;
    }

    int cmd_reflect(const Options &o)
    {
        auto ws = Workspace::open(o.store);
        const ReflectResult r = reflect(*ws, static_cast<NodeId>(o.node), o.from, o.to, read_overrides(o.overrides));
        std::cout << r.to_json().dump(2) << '\n';
        return ws->tree().get(r.branch).status == NodeStatus::failed ? 1 : 0;
    }

    int cmd_retrospect(const Options &o)
    {
        auto ws = Workspace::open(o.store);
        const ScenarioNode n = retrospect(*ws, static_cast<NodeId>(o.node), o.at, read_overrides(o.overrides), o.until);
        std::cout << node_to_json(n).dump(2) << '\n';
        return n.status == NodeStatus::failed ? 1 : 0;
    }

    int cmd_report(const Options &o)
    {
        auto ws = Workspace::open(o.store);
        const ObservationSpec obs = o.config.empty() ? observation_from_json(ws->store().section("observation"))
                                                     : load_config(o.config).observation;
        print_report(build_report(*ws, obs), o.format);
        return 0;
    }

    int cmd_serve(const Options &o)
    {
        Service service(o.store);
        httplib::Server server;
        service.mount(server);
        std::cerr << "listening on " << o.host << ':' << o.port << '\n';
        return server.listen(o.host, o.port) ? 0 : 2;
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"Branching simulation engine"};
    app.require_subcommand(1);
    Options o;

    auto store_opt = [&](CLI::App *sub)
    { sub->add_option("--store", o.store, "store directory")->envname("BRANCHSIM_STORE"); };
    auto format_opt = [&](CLI::App *sub)
    { sub->add_option("--format", o.format, "json or table")->check(CLI::IsMember({"json", "table"})); };

    auto *predict = app.add_subcommand("predict", "run the declared branches of a config to the horizon");
    predict->add_option("--config", o.config, "scenario config")->required();
    store_opt(predict);
    predict->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    predict->add_option("--until", o.until, "override the horizon");
    format_opt(predict);

    auto *run = app.add_subcommand("run", "run one node, or every pending node, to --until");
    store_opt(run);
    run->add_option("--node", o.node, "node id (all pending nodes when absent)");
    run->add_option("--until", o.until, "target step");
    run->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);

    auto *reflect = app.add_subcommand("reflect", "re-run a window of a node with overrides, incrementally");
    store_opt(reflect);
    reflect->add_option("--node", o.node)->required();
    reflect->add_option("--from", o.from)->required();
    reflect->add_option("--to", o.to)->required();
    reflect->add_option("--overrides", o.overrides, "JSON object or @file");

    auto *retro = app.add_subcommand("retrospect", "branch from a historical step of a node's lineage");
    store_opt(retro);
    retro->add_option("--node", o.node)->required();
    retro->add_option("--at", o.at)->required();
    retro->add_option("--overrides", o.overrides, "JSON object or @file");
    retro->add_option("--until", o.until, "run the branch to this step (node end by default)");

    auto *report = app.add_subcommand("report", "savings and equivalence classes");
    store_opt(report);
    report->add_option("--config", o.config, "take the observation spec from this config");
    format_opt(report);

    auto *serve = app.add_subcommand("serve", "HTTP/JSON service");
    store_opt(serve);
    serve->add_option("--host", o.host);
    serve->add_option("--port", o.port);

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*predict)
            return cmd_predict(o);
        if (*run)
            return cmd_run(o);
        if (*reflect)
            return cmd_reflect(o);
        if (*retro)
            return cmd_retrospect(o);
        if (*report)
            return cmd_report(o);
        return cmd_serve(o);
    }
    catch (const Error &e)
    {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.detail() << '\n';
        return 2;
    }
}
