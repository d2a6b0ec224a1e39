#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "branchsim/error.hpp"
#include "branchsim/json_io.hpp"
#include "branchsim/operations.hpp"
#include "branchsim/probe.hpp"

namespace py = pybind11;
using namespace branchsim;
using json = nlohmann::json;

// JSON crosses the boundary as text; the Python package decodes it.
namespace
{
    ParamOverrides overrides_arg(const std::string &text)
    {
        return overrides_from_json(text.empty() ? json::object() : json::parse(text));
    }

    NodeId node_arg(std::uint64_t id) { return static_cast<NodeId>(id); }

    class PyWorkspace
    {
    public:
        explicit PyWorkspace(std::unique_ptr<Workspace> ws) : ws_(std::move(ws)) {}

        std::uint64_t root() const { return raw(ws_->root()); }

        std::string tree() const
        {
            json out = ws_->tree().to_json();
            out["spec"] = spec_to_json(ws_->store().spec());
            out["checkpoint_interval"] = ws_->store().checkpoint_interval();
            return out.dump();
        }

        std::string run(std::uint64_t node, std::int64_t until, bool incremental)
        {
            py::gil_scoped_release release;
            return node_to_json(ws_->engine().run(RunRequest{node_arg(node), until, incremental})).dump();
        }

        void run_tree(std::int64_t until, std::size_t workers)
        {
            py::gil_scoped_release release;
            ws_->engine().run_tree(until, workers);
        }

        std::pair<std::uint64_t, bool> branch(std::uint64_t parent, std::int64_t at_step, const std::string &overrides)
        {
            const BranchResult r = ws_->engine().branch(node_arg(parent), at_step, overrides_arg(overrides));
            return {raw(r.node.id), r.duplicate};
        }

        void annotate(std::uint64_t node, const std::string &kind, const std::string &text)
        {
            ws_->tree().annotate(node_arg(node), annotation_kind_from_string(kind), text);
        }

        std::string counters(std::uint64_t node) const
        {
            const auto c = ws_->ledger().counters(node_arg(node));
            return json{{"fresh", c.fresh}, {"replay", c.replay}, {"reused", c.reused}}.dump();
        }

        std::string digest(std::uint64_t node, std::int64_t step) const
        {
            return ws_->store().digest_at(node_arg(node), step).hex();
        }

        std::vector<double> frame(std::uint64_t node, std::int64_t step) const
        {
            const Frame f = extract_frame(ws_->store(), ws_->tree(), node_arg(node), step);
            std::vector<double> out(f.state.size());
            for (CellIndex i = 0; i < out.size(); ++i)
                out[i] = f.state.value(i);
            return out;
        }

        std::string frame_deltas_json(std::uint64_t node, std::int64_t from, std::int64_t to) const
        {
            json out = json::array();
            for (const auto &d : frame_deltas(ws_->store(), ws_->tree(), node_arg(node), from, to))
                out.push_back(frame_delta_to_json(d));
            return out.dump();
        }

        double probe(std::uint64_t node, double x, double y, std::int64_t step) const
        {
            return sample_point(ws_->store(), ws_->tree(), ProbeQuery{node_arg(node), x, y, step});
        }

        std::string report(const std::string &observation) const
        {
            const json obs = observation.empty() ? ws_->store().section("observation") : json::parse(observation);
            return build_report(*ws_, observation_from_json(obs)).dump();
        }

        std::string reflect_(std::uint64_t node, std::int64_t from, std::int64_t to, const std::string &overrides)
        {
            return reflect(*ws_, node_arg(node), from, to, overrides_arg(overrides)).to_json().dump();
        }

        std::string retrospect_(std::uint64_t node, std::int64_t at, const std::string &overrides,
                                std::optional<std::int64_t> until)
        {
            return node_to_json(retrospect(*ws_, node_arg(node), at, overrides_arg(overrides), until)).dump();
        }

        std::vector<std::uint64_t> predict_(const std::string &config, std::size_t workers)
        {
            const ScenarioConfig c = parse_config(config);
            std::vector<std::uint64_t> ids;
            for (NodeId id : predict(*ws_, c, workers ? workers : c.max_workers).branch_nodes)
                ids.push_back(raw(id));
            return ids;
        }

        void save() { ws_->save(); }

    private:
        std::unique_ptr<Workspace> ws_;
    };
}

PYBIND11_MODULE(_branchsim, m)
{
    m.doc() = "branching simulation engine";

    static py::exception<branchsim::Error> error(m, "BranchsimError");
    py::register_exception_translator(
        [](std::exception_ptr p)
        {
            try
            {
                if (p)
                    std::rethrow_exception(p);
            }
            catch (const branchsim::Error &e)
            {
                py::set_error(error, e.what());
            }
            catch (const json::exception &e)
            {
                py::set_error(error, (std::string("InvalidConfig: ") + e.what()).c_str());
            }
        });

    py::class_<PyWorkspace>(m, "Workspace")
        .def_static(
            "create",
            [](const std::string &config, const std::string &store)
            { return PyWorkspace(create_workspace(parse_config(config), store)); },
            py::arg("config"), py::arg("store") = "")
        .def_static(
            "open", [](const std::string &store) { return PyWorkspace(Workspace::open(store)); }, py::arg("store"))
        .def("root", &PyWorkspace::root)
        .def("tree_json", &PyWorkspace::tree)
        .def("run", &PyWorkspace::run, py::arg("node"), py::arg("until"), py::arg("incremental") = false)
        .def("run_tree", &PyWorkspace::run_tree, py::arg("until"), py::arg("workers") = 1)
        .def("branch", &PyWorkspace::branch, py::arg("parent"), py::arg("at_step"), py::arg("overrides") = "")
        .def("annotate", &PyWorkspace::annotate)
        .def("counters_json", &PyWorkspace::counters)
        .def("digest", &PyWorkspace::digest)
        .def("frame", &PyWorkspace::frame)
        .def("frame_deltas_json", &PyWorkspace::frame_deltas_json)
        .def("probe", &PyWorkspace::probe, py::arg("node"), py::arg("x"), py::arg("y"), py::arg("step"))
        .def("report_json", &PyWorkspace::report, py::arg("observation") = "")
        .def("reflect_json", &PyWorkspace::reflect_, py::arg("node"), py::arg("from_step"), py::arg("to_step"),
             py::arg("overrides") = "")
        .def("retrospect_json", &PyWorkspace::retrospect_, py::arg("node"), py::arg("at_step"),
             py::arg("overrides") = "", py::arg("until") = py::none())
        .def("predict", &PyWorkspace::predict_, py::arg("config"), py::arg("workers") = 0)
        .def("save", &PyWorkspace::save);

    m.def(
        "theorem71_no_gain", [](std::int64_t p, std::int64_t s) { return theorem71_no_gain(p, s); });
    m.def("theorem72_advice",
          [](std::int64_t p, std::int64_t s) { return std::string(to_string(theorem72_advice(p, s).verdict)); });
}
