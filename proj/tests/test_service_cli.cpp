#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "branchsim/json_io.hpp"
#include "branchsim/operations.hpp"
#include "branchsim/probe.hpp"
#include "branchsim/service.hpp"
#include "support.hpp"

#include "httplib.h"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sys/wait.h>

using namespace branchsim;
using namespace testing_support;
using json = nlohmann::json;

namespace
{
    const std::string source_dir = BRANCHSIM_SOURCE_DIR;
    const std::string cli = BRANCHSIM_CLI_PATH;

    struct Running
    {
        Service service;
        httplib::Server server;
        std::thread thread;
        int port = 0;

        explicit Running(std::filesystem::path store) : service(std::move(store))
        {
            service.mount(server);
            port = server.bind_to_any_port("127.0.0.1");
            thread = std::thread([this] { server.listen_after_bind(); });
            server.wait_until_ready();
        }
        ~Running()
        {
            server.stop();
            thread.join();
        }
        httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
    };

    json body(const httplib::Result &r)
    {
        REQUIRE(r);
        return json::parse(r->body);
    }

    httplib::Result post(httplib::Client &c, const std::string &path, const json &j)
    {
        return c.Post(path, j.dump(), "application/json");
    }

    json small_config(std::int64_t horizon = 100)
    {
        VesselParams p = demo_params(24, 24);
        return json{{"spec", spec_to_json(vessel_spec(24, 24))},
                    {"params", params_to_json(p)},
                    {"horizon", horizon},
                    {"checkpoint_interval", 10}};
    }

    json wait_run(httplib::Client &c, const std::string &token)
    {
        for (int i = 0; i < 2000; ++i)
        {
            json st = body(c.Get("/runs/" + token));
            if (st["state"] == "complete" || st["state"] == "failed")
                return st;
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        FAIL("run did not finish");
        return {};
    }

    struct Outcome
    {
        int code = -1;
        std::string out;
    };

    Outcome run_cli(const std::string &args)
    {
        const std::string cmd = cli + " " + args + " 2>&1";
        Outcome o;
        FILE *p = ::popen(cmd.c_str(), "r");
        REQUIRE(p != nullptr);
        char buf[4096];
        while (std::size_t n = std::fread(buf, 1, sizeof buf, p))
            o.out.append(buf, n);
        const int status = ::pclose(p);
        o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        return o;
    }
}

TEST_CASE("http: status codes for error codes")
{
    CHECK(http_status(ErrorCode::UnknownNode) == 404);
    CHECK(http_status(ErrorCode::NotYetSimulated) == 409);
    CHECK(http_status(ErrorCode::DuplicateBranch) == 409);
    CHECK(http_status(ErrorCode::UnstableParams) == 422);
    CHECK(http_status(ErrorCode::InvalidParams) == 422);
}

TEST_CASE("http: simulate, branch, tree, frames, probe, report")
{
    Running r({});
    auto c = r.client();

    CHECK(body(c.Get("/tree"))["reason"] == "UnknownNode");

    auto created = post(c, "/simulations", small_config());
    REQUIRE(created);
    CHECK(created->status == 201);
    const auto root = body(created)["root"].get<std::uint64_t>();
    CHECK(root == 1);

    auto started = post(c, "/nodes/1/run", {{"until", 50}});
    CHECK(started->status == 202);
    const json done = wait_run(c, body(started)["token"]);
    CHECK(done["state"] == "complete");
    CHECK(done["until"] == 50);

    SUBCASE("branch beyond the window is 409 NotYetSimulated")
    {
        auto res = post(c, "/nodes/1/branch", {{"at_step", 80}});
        CHECK(res->status == 409);
        CHECK(body(res)["reason"] == "NotYetSimulated");
    }
    SUBCASE("unknown node is 404")
    {
        CHECK(post(c, "/nodes/7/branch", {{"at_step", 1}})->status == 404);
        CHECK(c.Get("/nodes/7/probe?x=1&y=1&step=1")->status == 404);
        CHECK(post(c, "/nodes/7/run", {{"until", 3}})->status == 404);
        CHECK(c.Get("/runs/run-999")->status == 404);
    }
    SUBCASE("unstable override is 422 naming the invariant")
    {
        auto res = post(c, "/nodes/1/branch", {{"at_step", 10}, {"overrides", {{"diffusion_D", 50.0}}}});
        CHECK(res->status == 422);
        CHECK(body(res)["reason"] == "UnstableParams");
        CHECK(body(res)["detail"].get<std::string>().find("dt") != std::string::npos);
        CHECK(post(c, "/nodes/1/branch", {{"at_step", 10}, {"overrides", {{"bogus", 1}}}})->status == 422);
        CHECK(c.Post("/nodes/1/branch", "{oops", "application/json")->status == 422);
    }
    SUBCASE("branch, tree, duplicate, annotations")
    {
        auto res = post(c, "/nodes/1/branch",
                        {{"at_step", 30},
                         {"overrides", {{"source_amp", 2.0}}},
                         {"annotations", {{{"kind", "conditional"}, {"text", "if the pulse doubles"}}}}});
        REQUIRE(res->status == 201);
        const auto child = body(res)["node"].get<std::uint64_t>();
        const json tree = body(c.Get("/tree"));
        REQUIRE(tree["nodes"].size() == 2);
        CHECK(tree["nodes"][0]["parent"].is_null());
        CHECK(tree["nodes"][1]["id"] == child);
        CHECK(tree["nodes"][1]["parent"] == root);
        CHECK(tree["nodes"][1]["branch_point"]["branch_step"] == 30);
        CHECK(tree["nodes"][1]["annotations"][0]["kind"] == "conditional");
        CHECK(tree["spec"]["simulator"] == "vesselgrid");

        auto dup = post(c, "/nodes/1/branch", {{"at_step", 30}, {"overrides", {{"source_amp", 2.0}}}});
        CHECK(dup->status == 409);
        CHECK(body(dup)["reason"] == "DuplicateBranch");
        CHECK(body(dup)["node"] == child);

        auto bad = post(c, "/nodes/1/branch",
                        {{"at_step", 31}, {"annotations", {{{"kind", "conditional"}, {"text", ""}}}}});
        CHECK(bad->status == 422);
        CHECK(body(bad)["reason"] == "InvalidAnnotation");
        CHECK(body(c.Get("/tree"))["nodes"].size() == 2);
    }
    SUBCASE("frames: folding deltas reproduces full frames")
    {
        post(c, "/nodes/1/branch", {{"at_step", 30}, {"overrides", {{"diffusion_D", 0.1}}}});
        const json run2 = wait_run(c, body(post(c, "/nodes/2/run", {{"until", 70}}))["token"]);
        CHECK(run2["state"] == "complete");

        const json full = body(c.Get("/nodes/2/frames?from=20&to=70&delta=false"));
        const json delta = body(c.Get("/nodes/2/frames?from=20&to=70&delta=true"));
        REQUIRE(full["frames"].size() == 51);
        REQUIRE(delta["deltas"].size() == 50);
        std::vector<double> cells = delta["first"]["cells"].get<std::vector<double>>();
        CHECK(cells == full["frames"][0]["cells"].get<std::vector<double>>());
        for (std::size_t k = 0; k < 50; ++k)
        {
            for (const auto &e : delta["deltas"][k]["entries"])
                cells[e[0].get<std::size_t>()] = e[1].get<double>();
            REQUIRE(cells == full["frames"][k + 1]["cells"].get<std::vector<double>>());
        }

        auto blob = c.Get("/nodes/2/frames?from=20&to=25&format=bsim1");
        REQUIRE(blob->status == 200);
        CHECK(blob->body.substr(0, 5) == "BSIM1");
        CHECK(c.Get("/nodes/2/frames?from=20&to=95")->status == 404);
        CHECK(c.Get("/nodes/2/frames?from=30&to=20")->status == 422);

        const json probe = body(c.Get("/nodes/2/probe?x=12&y=12&step=40"));
        const auto ws = r.service.workspace();
        CHECK(probe["value"].get<double>() == ws->store().state_at(NodeId{2}, 40).reals()[12 * 24 + 12]);
        CHECK(c.Get("/nodes/2/probe?x=40&y=1&step=40")->status == 422);

        const json report = body(c.Get("/report"));
        CHECK(report["savings"]["steps_linear"] == 70);
        CHECK(report["savings"]["steps_branching"] == 50 + 40);
    }
}

TEST_CASE("http: run failures are reported on the token")
{
    Running r({});
    auto c = r.client();
    post(c, "/simulations", small_config());
    wait_run(c, body(post(c, "/nodes/1/run", {{"until", 8}}))["token"]);
    post(c, "/nodes/1/branch",
         {{"at_step", 8}, {"overrides", {{"source_amp", 1e308}, {"source_period", 4}, {"dt", 1.0}}}});
    const json st = wait_run(c, body(post(c, "/nodes/2/run", {{"until", 30}}))["token"]);
    CHECK(st["state"] == "failed");
    CHECK(st["reason"] == "NumericFault");
    const json node = body(c.Get("/nodes/2"));
    CHECK(node["status"] == "failed");
}

TEST_CASE("http: a persisted store is served again after restart")
{
    const auto dir = scratch_dir("svc");
    {
        Running r(dir);
        auto c = r.client();
        post(c, "/simulations", small_config());
        wait_run(c, body(post(c, "/nodes/1/run", {{"until", 20}}))["token"]);
        CHECK(post(c, "/simulations", small_config())->status == 409);
    }
    Running again(dir);
    auto c = again.client();
    const json tree = body(c.Get("/tree"));
    CHECK(tree["nodes"][0]["window"] == json::array({0, 20}));
    std::filesystem::remove_all(dir);
}

TEST_CASE("cli: predict on the demo config")
{
    const auto dir = scratch_dir("cli");
    const Outcome o = run_cli("predict --config " + source_dir + "/configs/demo_predict.json --store " + dir.string());
    CHECK(o.code == 0);
    const json report = json::parse(o.out);
    CHECK(report["savings"]["steps_linear"] == 800);
    CHECK(report["savings"]["steps_branching"] == 440);
    CHECK(report["savings"]["ratio"].get<double>() == 0.55);
    CHECK(report["equivalence"]["prefix_classes"].size() == 1);

    const Outcome table = run_cli("report --format table --store " + dir.string());
    CHECK(table.code == 0);
    CHECK(table.out.find("ratio") != std::string::npos);

    const Outcome same = run_cli("reflect --store " + dir.string() + " --node 2 --from 130 --to 170");
    CHECK(same.code == 0);
    CHECK(json::parse(same.out)["unchanged"] == true);

    const Outcome changed =
        run_cli("reflect --store " + dir.string() + " --node 3 --from 130 --to 170 --overrides '{\"source_amp\": 4}'");
    CHECK(changed.code == 0);
    CHECK(json::parse(changed.out)["unchanged"] == false);

    const Outcome missing = run_cli("retrospect --store " + dir.string() + " --node 2 --at 500");
    CHECK(missing.code == 2);
    CHECK(missing.out.find("StepNotStored") != std::string::npos);

    const Outcome retro =
        run_cli("retrospect --store " + dir.string() + " --node 2 --at 57 --overrides '{\"diffusion_D\": 0.1}'");
    CHECK(retro.code == 0);
    CHECK(json::parse(retro.out)["window"] == json::array({57, 200}));

    CHECK(run_cli("report --store ''").code == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("cli: store path from the environment")
{
    const auto dir = scratch_dir("cli_env");
    const Outcome o = run_cli("predict --config " + source_dir + "/configs/demo_maxca.json --store " + dir.string());
    CHECK(o.code == 0);
    const std::string cmd = "BRANCHSIM_STORE=" + dir.string() + " " + cli + " report > /dev/null 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("cli: config errors carry positions and fail with exit 2")
{
    const auto dir = scratch_dir("cli_bad");
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "bad.json");
        f << "{\n  \"spec\": {\"simulator\": \"maxca\", \"width\": 4, \"height\": 4},\n  \"horizon\": 10,\n  oops\n}\n";
    }
    const Outcome o = run_cli("predict --config " + (dir / "bad.json").string() + " --store " + (dir / "s").string());
    CHECK(o.code == 2);
    CHECK(o.out.find("line 4") != std::string::npos);
    {
        std::ofstream f(dir / "late.json");
        f << json{{"spec", {{"simulator", "maxca"}, {"width", 4}, {"height", 4}}},
                  {"horizon", 10},
                  {"branches", {{{"at_step", 11}}}}}
                 .dump();
    }
    const Outcome late =
        run_cli("predict --config " + (dir / "late.json").string() + " --store " + (dir / "s2").string());
    CHECK(late.code == 2);
    CHECK(late.out.find("InvalidConfig") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("cli: a failed node gives exit 1")
{
    const auto dir = scratch_dir("cli_fail");
    std::filesystem::create_directories(dir);
    json cfg = small_config(40);
    cfg["branches"] = {{{"at_step", 8}, {"overrides", {{"source_amp", 1e308}, {"source_period", 4}, {"dt", 1.0}}}},
                       {{"at_step", 8}, {"overrides", json::object()}}};
    {
        std::ofstream f(dir / "fail.json");
        f << cfg.dump();
    }
    const Outcome o = run_cli("predict --config " + (dir / "fail.json").string() + " --store " + (dir / "s").string());
    CHECK(o.code == 1);
    const json out = json::parse(o.out);
    REQUIRE(out["failed"].size() == 1);
    CHECK(out["failed"][0]["id"] == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("cli and service give the same report for the same config")
{
    const auto dir = scratch_dir("same");
    const Outcome o = run_cli("predict --config " + source_dir + "/configs/demo_predict.json --store " + dir.string());
    REQUIRE(o.code == 0);
    const json cli_report = json::parse(o.out);

    const ScenarioConfig config = load_config(source_dir + "/configs/demo_predict.json");
    std::ifstream in(source_dir + "/configs/demo_predict.json");
    const json raw_config = json::parse(in);

    Running r({});
    auto c = r.client();
    post(c, "/simulations", raw_config);
    wait_run(c, body(post(c, "/nodes/1/run", {{"until", 120}}))["token"]);
    std::vector<std::string> tokens;
    for (const auto &b : raw_config["branches"])
    {
        auto res = post(c, "/nodes/1/branch", b);
        REQUIRE(res->status == 201);
        tokens.push_back(body(post(c, "/nodes/" + std::to_string(body(res)["node"].get<int>()) + "/run",
                                   {{"until", config.horizon}}))["token"]);
    }
    for (const auto &t : tokens)
        wait_run(c, t);
    CHECK(body(c.Get("/report")) == cli_report);

    auto stored = Workspace::open(dir);
    const json tree_http = body(c.Get("/tree"));
    CHECK(tree_http["nodes"] == stored->tree().to_json()["nodes"]);
    std::filesystem::remove_all(dir);
}
