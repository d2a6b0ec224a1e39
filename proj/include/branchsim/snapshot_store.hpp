#pragma once

#include "branchsim/digest.hpp"
#include "branchsim/node_id.hpp"
#include "branchsim/sim_core.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <variant>
#include <vector>

namespace branchsim
{
    inline constexpr std::uint16_t store_format_version = 1;
    inline constexpr std::int64_t default_checkpoint_interval = 10;

    Digest digest_state(const SimulatorSpec &spec, const FieldState &state);

    struct DeltaEntry
    {
        CellIndex index = 0;
        double value = 0.0; // maxca values are exact small integers

        bool operator==(const DeltaEntry &) const = default;
    };

    struct StateDelta
    {
        std::int64_t step_index = 0;
        std::vector<DeltaEntry> entries; // strictly ascending by index
    };

    // Entries for every cell whose bits differ; next.step_index is recorded.
    StateDelta make_delta(const FieldState &prev, const FieldState &next);
    void apply_delta(const SimulatorSpec &spec, FieldState &state, const StateDelta &delta);

    struct SegmentRecord
    {
        NodeId node_id{};
        std::int64_t start_step = 0;
        std::int64_t end_step = 0;
        std::int64_t checkpoint_interval = default_checkpoint_interval;
        std::map<std::int64_t, FieldState> snapshots;
        std::vector<StateDelta> deltas;   // deltas[k] produces step start_step + 1 + k
        std::vector<Digest> step_digests; // step_digests[k] is the digest at start_step + k
        Digest final_digest;
    };

    SegmentRecord begin_segment(const SimulatorSpec &spec, NodeId node, const FieldState &initial,
                                std::int64_t checkpoint_interval);

    // Throws OutOfOrderAppend unless prev sits at end_step and next one step later.
    SegmentRecord &append_step(const SimulatorSpec &spec, SegmentRecord &segment, const FieldState &prev,
                               const FieldState &next);

    // Nearest snapshot at or below `step` plus delta replay. `delta_applications`
    // receives the number of deltas folded in.
    FieldState get_state_at(const SimulatorSpec &spec, const SegmentRecord &segment, std::int64_t step,
                            std::size_t *delta_applications = nullptr);

    // Node steps (start, end] served by another node's stored steps
    // (donor_start, donor_start + end - start].
    struct SegmentLink
    {
        NodeId donor{};
        std::int64_t donor_start = 0;
    };

    struct Piece
    {
        std::int64_t start = 0;
        std::int64_t end = 0;
        std::variant<SegmentRecord, SegmentLink> body;

        bool is_link() const noexcept { return std::holds_alternative<SegmentLink>(body); }
    };

    struct StoreManifest
    {
        SimulatorSpec spec;
        std::int64_t checkpoint_interval = default_checkpoint_interval;
    };

    // Per-node trajectory storage. A node's track is a run of pieces: own
    // segments (snapshots + deltas) and links into a donor's track.
    //
    // Concurrency: one appender per track at a time, any number of readers;
    // tracks are independent of each other. A track's end step advances only
    // after a step is fully stored.
    class Store
    {
    public:
        // Empty path keeps everything in memory; save() is then a no-op.
        static std::unique_ptr<Store> create(const std::filesystem::path &path, const StoreManifest &manifest);
        static std::unique_ptr<Store> open(const std::filesystem::path &path);

        Store(const Store &) = delete;
        Store &operator=(const Store &) = delete;
        ~Store();

        const SimulatorSpec &spec() const noexcept { return manifest_.spec; }
        std::int64_t checkpoint_interval() const noexcept { return manifest_.checkpoint_interval; }
        const std::filesystem::path &path() const noexcept { return path_; }

        void begin_track(NodeId node, const FieldState &initial);
        void append(NodeId node, const FieldState &prev, const FieldState &next);
        void link(NodeId node, NodeId donor, std::int64_t donor_start, std::int64_t length);

        bool has_track(NodeId node) const;
        std::optional<std::pair<std::int64_t, std::int64_t>> window(NodeId node) const;
        std::vector<NodeId> nodes() const;
        std::vector<Piece> pieces(NodeId node) const;

        FieldState state_at(NodeId node, std::int64_t step, std::size_t *delta_applications = nullptr) const;
        Digest digest_at(NodeId node, std::int64_t step) const;
        // Delta producing `step` from `step - 1`; requires step > track start.
        StateDelta delta_at(NodeId node, std::int64_t step) const;

        // Visits consecutive states over [from, to] with one reconstruction plus
        // delta folding.
        void for_each_state(NodeId node, std::int64_t from, std::int64_t to,
                            const std::function<void(const FieldState &)> &visit) const;

        // Auxiliary manifest sections owned by higher layers (tree, ledger, memo).
        void set_section(const std::string &name, nlohmann::json value);
        nlohmann::json section(const std::string &name) const;

        void save();

        // Exposed for tests that need to corrupt stored data.
        void tamper_snapshot_for_testing(NodeId node, std::int64_t step, CellIndex cell, double value);

    private:
        struct Track
        {
            mutable std::shared_mutex mutex;
            std::vector<Piece> pieces;
            std::vector<std::int64_t> persisted_end; // per piece, for incremental save
        };

        Store(std::filesystem::path path, StoreManifest manifest);

        Track &track(NodeId node) const;
        Track *find_track(NodeId node) const;

        // Resolves `step` to (piece, owning node, step in that node) while the
        // caller holds the track's shared lock.
        FieldState state_locked(const Track &t, NodeId node, std::int64_t step, std::size_t *applied) const;
        Digest digest_locked(const Track &t, NodeId node, std::int64_t step) const;
        StateDelta delta_locked(const Track &t, NodeId node, std::int64_t step) const;

        void load();
        void write_segment(NodeId node, std::size_t piece_index, const SegmentRecord &seg) const;
        SegmentRecord read_segment(const std::filesystem::path &file) const;
        std::string segment_file_name(NodeId node, std::size_t piece_index) const;

        std::filesystem::path path_;
        StoreManifest manifest_;

        mutable std::shared_mutex tracks_mutex_;
        std::map<NodeId, std::unique_ptr<Track>> tracks_;

        mutable std::mutex sections_mutex_;
        nlohmann::json sections_ = nlohmann::json::object();

        std::mutex save_mutex_;
    };
}
