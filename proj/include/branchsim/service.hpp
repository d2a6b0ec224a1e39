#pragma once

#include "branchsim/error.hpp"
#include "branchsim/operations.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace httplib
{
    class Server;
}

namespace branchsim
{
    int http_status(ErrorCode code) noexcept;

    struct RunRecord
    {
        std::string token;
        NodeId node{};
        std::int64_t until_step = 0;
        std::string state = "queued"; // queued | running | complete | failed
        std::optional<ErrorCode> error;
        std::string detail;
    };

    nlohmann::json run_record_to_json(const RunRecord &r);

    // HTTP/JSON front end over one workspace. Runs execute on background
    // threads; every other request is answered synchronously.
    class Service
    {
    public:
        // Opens the store at `store_path` if it holds a manifest. An empty path
        // keeps simulations created through the API in memory.
        explicit Service(std::filesystem::path store_path);
        ~Service();

        Service(const Service &) = delete;
        Service &operator=(const Service &) = delete;

        void mount(httplib::Server &server);

        // Blocks until every submitted run has finished.
        void wait_for_runs();

        std::shared_ptr<Workspace> workspace() const;

    private:
        std::shared_ptr<Workspace> require_workspace() const;
        std::string submit_run(NodeId node, std::int64_t until, bool incremental);

        std::filesystem::path store_path_;
        mutable std::mutex ws_mutex_;
        std::shared_ptr<Workspace> ws_;
        std::mutex write_mutex_; // branch creation and simulation setup
        std::mutex save_mutex_;

        std::mutex runs_mutex_;
        std::map<std::string, RunRecord> runs_;
        std::uint64_t next_token_ = 1;
        std::vector<std::jthread> workers_;
    };
}
