#include "branchsim/service.hpp"

#include "branchsim/json_io.hpp"
#include "branchsim/probe.hpp"

#include "httplib.h"

#include <charconv>

namespace branchsim
{
    int http_status(ErrorCode code) noexcept
    {
        switch (code)
        {
        case ErrorCode::UnknownNode:
        case ErrorCode::StepNotStored:
            return 404;
        case ErrorCode::NotYetSimulated:
        case ErrorCode::DuplicateBranch:
        case ErrorCode::NodeBusy:
        case ErrorCode::TreeIncomplete:
            return 409;
        case ErrorCode::CorruptStore:
        case ErrorCode::CorruptLineage:
        case ErrorCode::NumericFault:
            return 500;
        default:
            return 422;
        }
    }

    nlohmann::json run_record_to_json(const RunRecord &r)
    {
        nlohmann::json j{{"token", r.token}, {"node", raw(r.node)}, {"until", r.until_step}, {"state", r.state}};
        if (r.error)
        {
            j["reason"] = std::string(to_string(*r.error));
            j["detail"] = r.detail;
        }
        return j;
    }

    namespace
    {
        using json = nlohmann::json;

        void reply(httplib::Response &res, int status, const json &body)
        {
            res.status = status;
            res.set_content(body.dump(), "application/json");
        }

        void reply_error(httplib::Response &res, int status, std::string_view reason, const std::string &detail)
        {
            reply(res, status, json{{"reason", reason}, {"detail", detail}});
        }

        // Wraps a handler so library errors become {"reason", "detail"} bodies.
        httplib::Server::Handler guarded(std::function<void(const httplib::Request &, httplib::Response &)> fn)
        {
            return [fn = std::move(fn)](const httplib::Request &req, httplib::Response &res)
            {
                try
                {
                    fn(req, res);
                }
                catch (const Error &e)
                {
                    reply_error(res, http_status(e.code()), to_string(e.code()), e.detail());
                }
                catch (const json::exception &e)
                {
                    reply_error(res, 422, to_string(ErrorCode::InvalidConfig), e.what());
                }
            };
        }

        json parse_body(const httplib::Request &req)
        {
            if (req.body.empty())
                return json::object();
            try
            {
                return json::parse(req.body);
            }
            catch (const json::parse_error &e)
            {
                const auto [line, column] = line_column(req.body, e.byte == 0 ? 0 : e.byte - 1);
                fail(ErrorCode::InvalidConfig, "request body parse error at line " + std::to_string(line) +
                                                   ", column " + std::to_string(column));
            }
        }

        NodeId node_param(const httplib::Request &req)
        {
            std::uint64_t id = 0;
            const std::string &s = req.matches[1].str();
            std::from_chars(s.data(), s.data() + s.size(), id);
            return static_cast<NodeId>(id);
        }

        template <typename T> T query(const httplib::Request &req, const std::string &key, ErrorCode code)
        {
            if (!req.has_param(key))
                fail(code, "missing query parameter '" + key + "'");
            const std::string s = req.get_param_value(key);
            T value{};
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
            if (ec != std::errc{} || ptr != s.data() + s.size())
                fail(code, "query parameter '" + key + "' is not a number");
            return value;
        }
    }

    Service::Service(std::filesystem::path store_path) : store_path_(std::move(store_path))
    {
        if (!store_path_.empty() && std::filesystem::exists(store_path_ / "manifest.json"))
            ws_ = Workspace::open(store_path_);
    }

    Service::~Service()
    {
        wait_for_runs();
    }

    void Service::wait_for_runs()
    {
        std::vector<std::jthread> pending;
        {
            std::lock_guard lock(runs_mutex_);
            pending.swap(workers_);
        }
        pending.clear(); // joins
    }

    std::shared_ptr<Workspace> Service::workspace() const
    {
        std::lock_guard lock(ws_mutex_);
        return ws_;
    }

    std::shared_ptr<Workspace> Service::require_workspace() const
    {
        auto ws = workspace();
        if (!ws)
            fail(ErrorCode::UnknownNode, "no simulation has been created");
        return ws;
    }

    std::string Service::submit_run(NodeId node, std::int64_t until, bool incremental)
    {
        auto ws = require_workspace();
        ws->tree().get(node); // 404 before a token is handed out
        std::lock_guard lock(runs_mutex_);
        const std::string token = "run-" + std::to_string(next_token_++);
        runs_[token] = RunRecord{token, node, until, "queued", std::nullopt, {}};
        workers_.emplace_back(
            [this, ws, token, node, until, incremental]
            {
                auto update = [&](auto &&fn)
                {
                    std::lock_guard l(runs_mutex_);
                    fn(runs_.at(token));
                };
                update([](RunRecord &r) { r.state = "running"; });
                try
                {
                    const ScenarioNode n = ws->engine().run(RunRequest{node, until, incremental});
                    update([&](RunRecord &r) { r.state = n.status == NodeStatus::failed ? "failed" : "complete"; });
                }
                catch (const Error &e)
                {
                    update(
                        [&](RunRecord &r)
                        {
                            r.state = "failed";
                            r.error = e.code();
                            r.detail = e.detail();
                        });
                }
                std::lock_guard l(save_mutex_);
                ws->save();
            });
        return token;
    }

    void Service::mount(httplib::Server &server)
    {
        server.Post("/simulations", guarded(
                                        [this](const httplib::Request &req, httplib::Response &res)
                                        {
                                            const ScenarioConfig config = config_from_json(parse_body(req));
                                            std::lock_guard lock(write_mutex_);
                                            if (workspace() && !store_path_.empty())
                                            {
                                                reply_error(res, 409, "SimulationExists",
                                                            "the store already holds a simulation");
                                                return;
                                            }
                                            std::shared_ptr<Workspace> ws = create_workspace(config, store_path_);
                                            const NodeId root = ws->root();
                                            {
                                                std::lock_guard l(ws_mutex_);
                                                ws_ = std::move(ws);
                                            }
                                            reply(res, 201, json{{"root", raw(root)}});
                                        }));

        server.Post(R"(/nodes/(\d+)/run)",
                    guarded(
                        [this](const httplib::Request &req, httplib::Response &res)
                        {
                            const json body = parse_body(req);
                            if (!body.contains("until"))
                                fail(ErrorCode::InvalidRange, "body needs 'until'");
                            const auto until = body.at("until").get<std::int64_t>();
                            const std::string token =
                                submit_run(node_param(req), until, body.value("incremental", false));
                            reply(res, 202, json{{"token", token}});
                        }));

        server.Post(R"(/nodes/(\d+)/branch)",
                    guarded(
                        [this](const httplib::Request &req, httplib::Response &res)
                        {
                            const json body = parse_body(req);
                            if (!body.contains("at_step"))
                                fail(ErrorCode::InvalidRange, "body needs 'at_step'");
                            const auto at_step = body.at("at_step").get<std::int64_t>();
                            const ParamOverrides overrides = overrides_from_json(body.value("overrides", json::object()));
                            std::vector<Annotation> annotations;
                            for (const auto &a : body.value("annotations", json::array()))
                            {
                                Annotation ann{annotation_kind_from_string(a.at("kind").get<std::string>()),
                                               a.value("text", std::string())};
                                if (ann.kind == AnnotationKind::conditional && ann.text.empty())
                                    fail(ErrorCode::InvalidAnnotation, "conditional annotation needs a condition");
                                annotations.push_back(std::move(ann));
                            }
                            auto ws = require_workspace();
                            std::lock_guard lock(write_mutex_);
                            const BranchResult br = ws->engine().branch(node_param(req), at_step, overrides);
                            if (br.duplicate)
                            {
                                reply(res, 409,
                                      json{{"reason", to_string(ErrorCode::DuplicateBranch)},
                                           {"detail", "an identical branch already exists"},
                                           {"node", raw(br.node.id)}});
                                return;
                            }
                            for (const auto &a : annotations)
                                ws->tree().annotate(br.node.id, a.kind, a.text);
                            {
                                std::lock_guard l(save_mutex_);
                                ws->save();
                            }
                            reply(res, 201, json{{"node", raw(br.node.id)}});
                        }));

        server.Get("/tree", guarded(
                                [this](const httplib::Request &, httplib::Response &res)
                                {
                                    auto ws = require_workspace();
                                    json out = ws->tree().to_json();
                                    out["spec"] = spec_to_json(ws->store().spec());
                                    out["checkpoint_interval"] = ws->store().checkpoint_interval();
                                    reply(res, 200, out);
                                }));

        server.Get(R"(/nodes/(\d+))", guarded(
                                          [this](const httplib::Request &req, httplib::Response &res)
                                          {
                                              auto ws = require_workspace();
                                              const ScenarioNode n = ws->tree().get(node_param(req));
                                              json out = node_to_json(n);
                                              const auto c = ws->ledger().counters(n.id);
                                              out["counters"] = {
                                                  {"fresh", c.fresh}, {"replay", c.replay}, {"reused", c.reused}};
                                              reply(res, 200, out);
                                          }));

        server.Get(R"(/nodes/(\d+)/frames)",
                   guarded(
                       [this](const httplib::Request &req, httplib::Response &res)
                       {
                           auto ws = require_workspace();
                           const NodeId node = node_param(req);
                           ws->tree().get(node);
                           const auto from = query<std::int64_t>(req, "from", ErrorCode::InvalidRange);
                           const auto to = query<std::int64_t>(req, "to", ErrorCode::InvalidRange);
                           if (from > to)
                               fail(ErrorCode::InvalidRange, "from must not exceed to");
                           const bool delta = req.get_param_value("delta") == "true";
                           const std::string format =
                               req.has_param("format") ? req.get_param_value("format") : std::string("json");
                           if (format != "json" && format != "bsim1")
                               fail(ErrorCode::InvalidConfig, "format must be json or bsim1");

                           const Frame first = extract_frame(ws->store(), ws->tree(), node, from);
                           const std::vector<FrameDelta> deltas =
                               from < to ? frame_deltas(ws->store(), ws->tree(), node, from, to)
                                         : std::vector<FrameDelta>{};
                           if (format == "bsim1")
                           {
                               const Bytes blob = frames_to_blocks(ws->store().spec(), first, deltas);
                               res.set_content(std::string(blob.begin(), blob.end()), "application/octet-stream");
                               return;
                           }
                           json out{{"node", raw(node)}, {"from", from}, {"to", to}, {"delta", delta}};
                           if (delta)
                           {
                               out["first"] = frame_to_json(first);
                               json arr = json::array();
                               for (const auto &d : deltas)
                                   arr.push_back(frame_delta_to_json(d));
                               out["deltas"] = std::move(arr);
                           }
                           else
                           {
                               json arr = json::array({frame_to_json(first)});
                               for (std::int64_t s = from + 1; s <= to; ++s)
                                   arr.push_back(frame_to_json(extract_frame(ws->store(), ws->tree(), node, s)));
                               out["frames"] = std::move(arr);
                           }
                           reply(res, 200, out);
                       }));

        server.Get(R"(/nodes/(\d+)/probe)",
                   guarded(
                       [this](const httplib::Request &req, httplib::Response &res)
                       {
                           auto ws = require_workspace();
                           ProbeQuery q{node_param(req), query<double>(req, "x", ErrorCode::InvalidProbe),
                                        query<double>(req, "y", ErrorCode::InvalidProbe),
                                        query<std::int64_t>(req, "step", ErrorCode::InvalidProbe)};
                           const double v = sample_point(ws->store(), ws->tree(), q);
                           reply(res, 200,
                                 json{{"node", raw(q.node)}, {"x", q.x}, {"y", q.y}, {"step", q.step}, {"value", v}});
                       }));

        server.Get("/report", guarded(
                                  [this](const httplib::Request &, httplib::Response &res)
                                  {
                                      auto ws = require_workspace();
                                      const ObservationSpec obs =
                                          observation_from_json(ws->store().section("observation"));
                                      reply(res, 200, build_report(*ws, obs));
                                  }));

        server.Get(R"(/runs/([\w-]+))", guarded(
                                            [this](const httplib::Request &req, httplib::Response &res)
                                            {
                                                std::lock_guard lock(runs_mutex_);
                                                auto it = runs_.find(req.matches[1].str());
                                                if (it == runs_.end())
                                                {
                                                    reply_error(res, 404, "UnknownRun", "no run with that token");
                                                    return;
                                                }
                                                reply(res, 200, run_record_to_json(it->second));
                                            }));
    }
}
