#include "branchsim/snapshot_store.hpp"

#include "branchsim/error.hpp"
#include "branchsim/json_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace branchsim
{
    namespace fs = std::filesystem;

    namespace
    {
        constexpr char segment_magic[6] = {'B', 'S', 'I', 'M', '1', '\0'};
        constexpr const char *manifest_name = "manifest.json";

        enum BlockTag : std::uint8_t
        {
            tag_header = 0,
            tag_snapshot = 1,
            tag_delta = 2,
            tag_digest = 3,
        };

        void write_block(Bytes &out, BlockTag tag, const Bytes &payload)
        {
            out.push_back(tag);
            write_le64(out, payload.size());
            out.insert(out.end(), payload.begin(), payload.end());
        }

        void write_value(const SimulatorSpec &spec, Bytes &out, double v)
        {
            if (spec.simulator == SimulatorId::vesselgrid)
                write_le64(out, std::bit_cast<std::uint64_t>(v));
            else
                out.push_back(static_cast<std::uint8_t>(v));
        }

        struct Reader
        {
            const std::uint8_t *p;
            const std::uint8_t *end;

            void need(std::size_t n) const
            {
                if (static_cast<std::size_t>(end - p) < n)
                    fail(ErrorCode::CorruptStore, "truncated segment file");
            }
            std::uint64_t u64()
            {
                need(8);
                const auto v = read_le64(p);
                p += 8;
                return v;
            }
            std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
            std::uint8_t u8()
            {
                need(1);
                return *p++;
            }
            double value(const SimulatorSpec &spec)
            {
                if (spec.simulator == SimulatorId::vesselgrid)
                    return std::bit_cast<double>(u64());
                return static_cast<double>(u8());
            }
        };

        const Piece *find_piece(const std::vector<Piece> &pieces, std::int64_t step, bool delta_rule)
        {
            for (const Piece &piece : pieces)
            {
                // Link pieces never own their start step; own pieces own it
                // unless we are looking for the delta that produced it.
                const bool excl_start = piece.is_link() || delta_rule;
                const bool lower_ok = excl_start ? step > piece.start : step >= piece.start;
                if (lower_ok && step <= piece.end)
                    return &piece;
            }
            return nullptr;
        }

        void write_file_atomically(const fs::path &target, const void *data, std::size_t size)
        {
            const fs::path tmp = target.string() + ".tmp";
            {
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                out.write(static_cast<const char *>(data), static_cast<std::streamsize>(size));
                if (!out)
                    fail(ErrorCode::CorruptStore, "failed writing " + tmp.string());
            }
            fs::rename(tmp, target);
        }
    }

    Digest digest_state(const SimulatorSpec &spec, const FieldState &state)
    {
        return sha256(canonical_bytes(spec, state));
    }

    StateDelta make_delta(const FieldState &prev, const FieldState &next)
    {
        StateDelta delta;
        delta.step_index = next.step_index;
        for (CellIndex i = 0; i < next.size(); ++i)
        {
            if (!same_bits(prev, next, i))
            {
                delta.entries.push_back({i, next.value(i)});
            }
        }
        return delta;
    }

    void apply_delta(const SimulatorSpec &spec, FieldState &state, const StateDelta &delta)
    {
        if (spec.simulator == SimulatorId::vesselgrid)
        {
            auto &cells = state.reals();
            for (const auto &e : delta.entries)
                cells[e.index] = e.value;
        }
        else
        {
            auto &cells = state.octets();
            for (const auto &e : delta.entries)
                cells[e.index] = static_cast<std::uint8_t>(e.value);
        }
        state.step_index = delta.step_index;
    }

    SegmentRecord begin_segment(const SimulatorSpec &spec, NodeId node, const FieldState &initial,
                                std::int64_t checkpoint_interval)
    {
        if (checkpoint_interval <= 0)
        {
            fail(ErrorCode::InvalidConfig, "checkpoint_interval must be positive");
        }
        SegmentRecord seg;
        seg.node_id = node;
        seg.start_step = initial.step_index;
        seg.end_step = initial.step_index;
        seg.checkpoint_interval = checkpoint_interval;
        seg.snapshots.emplace(initial.step_index, initial);
        seg.final_digest = digest_state(spec, initial);
        seg.step_digests.push_back(seg.final_digest);
        return seg;
    }

    SegmentRecord &append_step(const SimulatorSpec &spec, SegmentRecord &segment, const FieldState &prev,
                               const FieldState &next)
    {
        if (prev.step_index != segment.end_step || next.step_index != prev.step_index + 1)
        {
            fail(ErrorCode::OutOfOrderAppend, "segment ends at " + std::to_string(segment.end_step) +
                                                  ", got " + std::to_string(prev.step_index) + " -> " +
                                                  std::to_string(next.step_index));
        }
        segment.deltas.push_back(make_delta(prev, next));
        if ((next.step_index - segment.start_step) % segment.checkpoint_interval == 0)
        {
            segment.snapshots.emplace(next.step_index, next);
        }
        segment.final_digest = digest_state(spec, next);
        segment.step_digests.push_back(segment.final_digest);
        segment.end_step = next.step_index;
        return segment;
    }

    FieldState get_state_at(const SimulatorSpec &spec, const SegmentRecord &segment, std::int64_t step,
                            std::size_t *delta_applications)
    {
        if (step < segment.start_step || step > segment.end_step)
        {
            fail(ErrorCode::StepNotStored, "step " + std::to_string(step) + " outside [" +
                                               std::to_string(segment.start_step) + ", " +
                                               std::to_string(segment.end_step) + "]");
        }
        auto it = std::prev(segment.snapshots.upper_bound(step));
        FieldState state = it->second;
        for (std::int64_t s = it->first + 1; s <= step; ++s)
        {
            apply_delta(spec, state, segment.deltas[static_cast<std::size_t>(s - segment.start_step - 1)]);
        }
        if (delta_applications)
        {
            *delta_applications = static_cast<std::size_t>(step - it->first);
        }
        return state;
    }

    // ---------------------------------------------------------------- Store

    Store::Store(fs::path path, StoreManifest manifest) : path_(std::move(path)), manifest_(std::move(manifest)) {}

    Store::~Store() = default;

    std::unique_ptr<Store> Store::create(const fs::path &path, const StoreManifest &manifest)
    {
        validate_spec(manifest.spec);
        if (manifest.checkpoint_interval <= 0)
        {
            fail(ErrorCode::InvalidConfig, "checkpoint_interval must be positive");
        }
        if (!path.empty())
        {
            if (fs::exists(path) && (!fs::is_directory(path) || !fs::is_empty(path)))
            {
                fail(ErrorCode::InvalidConfig, "store path is not empty: " + path.string());
            }
            fs::create_directories(path / "segments");
        }
        std::unique_ptr<Store> store(new Store(path, manifest));
        store->save();
        return store;
    }

    std::unique_ptr<Store> Store::open(const fs::path &path)
    {
        std::unique_ptr<Store> store(new Store(path, StoreManifest{}));
        store->load();
        return store;
    }

    Store::Track *Store::find_track(NodeId node) const
    {
        std::shared_lock lock(tracks_mutex_);
        auto it = tracks_.find(node);
        return it == tracks_.end() ? nullptr : it->second.get();
    }

    Store::Track &Store::track(NodeId node) const
    {
        Track *t = find_track(node);
        if (!t)
        {
            fail(ErrorCode::StepNotStored, "node " + to_string(node) + " has no stored trajectory");
        }
        return *t;
    }

    void Store::begin_track(NodeId node, const FieldState &initial)
    {
        auto t = std::make_unique<Track>();
        t->pieces.push_back(
            Piece{initial.step_index, initial.step_index,
                  begin_segment(manifest_.spec, node, initial, manifest_.checkpoint_interval)});
        t->persisted_end.push_back(-1);
        std::unique_lock lock(tracks_mutex_);
        if (tracks_.contains(node))
        {
            fail(ErrorCode::OutOfOrderAppend, "node " + to_string(node) + " already has a track");
        }
        tracks_.emplace(node, std::move(t));
    }

    void Store::append(NodeId node, const FieldState &prev, const FieldState &next)
    {
        Track &t = track(node);
        std::unique_lock lock(t.mutex);
        Piece &last = t.pieces.back();
        if (last.end != prev.step_index)
        {
            fail(ErrorCode::OutOfOrderAppend, "track of node " + to_string(node) + " ends at " +
                                                  std::to_string(last.end) + ", got step " +
                                                  std::to_string(prev.step_index));
        }
        if (last.is_link())
        {
            SegmentRecord seg = begin_segment(manifest_.spec, node, prev, manifest_.checkpoint_interval);
            append_step(manifest_.spec, seg, prev, next);
            t.pieces.push_back(Piece{prev.step_index, next.step_index, std::move(seg)});
            t.persisted_end.push_back(-1);
            return;
        }
        auto &seg = std::get<SegmentRecord>(last.body);
        append_step(manifest_.spec, seg, prev, next);
        last.end = seg.end_step;
    }

    void Store::link(NodeId node, NodeId donor, std::int64_t donor_start, std::int64_t length)
    {
        if (length <= 0)
        {
            fail(ErrorCode::OutOfOrderAppend, "link length must be positive");
        }
        const auto donor_window = window(donor);
        if (!donor_window || donor_start < donor_window->first || donor_start + length > donor_window->second)
        {
            fail(ErrorCode::StepNotStored, "donor " + to_string(donor) + " does not cover the linked range");
        }
        Track &t = track(node);
        std::unique_lock lock(t.mutex);
        const std::int64_t start = t.pieces.back().end;
        t.pieces.push_back(Piece{start, start + length, SegmentLink{donor, donor_start}});
        t.persisted_end.push_back(-1);
    }

    bool Store::has_track(NodeId node) const
    {
        return find_track(node) != nullptr;
    }

    std::optional<std::pair<std::int64_t, std::int64_t>> Store::window(NodeId node) const
    {
        Track *t = find_track(node);
        if (!t)
            return std::nullopt;
        std::shared_lock lock(t->mutex);
        return std::make_pair(t->pieces.front().start, t->pieces.back().end);
    }

    std::vector<NodeId> Store::nodes() const
    {
        std::shared_lock lock(tracks_mutex_);
        std::vector<NodeId> out;
        for (const auto &[id, t] : tracks_)
            out.push_back(id);
        return out;
    }

    std::vector<Piece> Store::pieces(NodeId node) const
    {
        Track &t = track(node);
        std::shared_lock lock(t.mutex);
        return t.pieces;
    }

    FieldState Store::state_locked(const Track &t, NodeId node, std::int64_t step, std::size_t *applied) const
    {
        const Piece *piece = find_piece(t.pieces, step, false);
        if (!piece)
        {
            fail(ErrorCode::StepNotStored, "node " + to_string(node) + " has no state at step " +
                                               std::to_string(step));
        }
        if (const auto *link = std::get_if<SegmentLink>(&piece->body))
        {
            FieldState s = state_at(link->donor, link->donor_start + (step - piece->start), applied);
            s.step_index = step;
            return s;
        }
        return get_state_at(manifest_.spec, std::get<SegmentRecord>(piece->body), step, applied);
    }

    FieldState Store::state_at(NodeId node, std::int64_t step, std::size_t *delta_applications) const
    {
        const Track &t = track(node);
        std::shared_lock lock(t.mutex);
        return state_locked(t, node, step, delta_applications);
    }

    Digest Store::digest_locked(const Track &t, NodeId node, std::int64_t step) const
    {
        const Piece *piece = find_piece(t.pieces, step, false);
        if (!piece)
        {
            fail(ErrorCode::StepNotStored, "node " + to_string(node) + " has no digest at step " +
                                               std::to_string(step));
        }
        if (const auto *link = std::get_if<SegmentLink>(&piece->body))
        {
            return digest_at(link->donor, link->donor_start + (step - piece->start));
        }
        const auto &seg = std::get<SegmentRecord>(piece->body);
        return seg.step_digests[static_cast<std::size_t>(step - seg.start_step)];
    }

    Digest Store::digest_at(NodeId node, std::int64_t step) const
    {
        const Track &t = track(node);
        std::shared_lock lock(t.mutex);
        return digest_locked(t, node, step);
    }

    StateDelta Store::delta_locked(const Track &t, NodeId node, std::int64_t step) const
    {
        const Piece *piece = find_piece(t.pieces, step, true);
        if (!piece)
        {
            fail(ErrorCode::StepNotStored, "node " + to_string(node) + " has no delta for step " +
                                               std::to_string(step));
        }
        if (const auto *link = std::get_if<SegmentLink>(&piece->body))
        {
            StateDelta d = delta_at(link->donor, link->donor_start + (step - piece->start));
            d.step_index = step;
            return d;
        }
        const auto &seg = std::get<SegmentRecord>(piece->body);
        return seg.deltas[static_cast<std::size_t>(step - seg.start_step - 1)];
    }

    StateDelta Store::delta_at(NodeId node, std::int64_t step) const
    {
        const Track &t = track(node);
        std::shared_lock lock(t.mutex);
        return delta_locked(t, node, step);
    }

    void Store::for_each_state(NodeId node, std::int64_t from, std::int64_t to,
                               const std::function<void(const FieldState &)> &visit) const
    {
        if (from > to)
        {
            fail(ErrorCode::InvalidRange, "inverted step range");
        }
        FieldState state = state_at(node, from);
        visit(state);
        for (std::int64_t s = from + 1; s <= to; ++s)
        {
            apply_delta(manifest_.spec, state, delta_at(node, s));
            visit(state);
        }
    }

    void Store::set_section(const std::string &name, nlohmann::json value)
    {
        std::lock_guard lock(sections_mutex_);
        sections_[name] = std::move(value);
    }

    nlohmann::json Store::section(const std::string &name) const
    {
        std::lock_guard lock(sections_mutex_);
        auto it = sections_.find(name);
        return it == sections_.end() ? nlohmann::json() : *it;
    }

    void Store::tamper_snapshot_for_testing(NodeId node, std::int64_t step, CellIndex cell, double value)
    {
        Track &t = track(node);
        std::unique_lock lock(t.mutex);
        for (Piece &piece : t.pieces)
        {
            if (auto *seg = std::get_if<SegmentRecord>(&piece.body))
            {
                auto it = seg->snapshots.find(step);
                if (it != seg->snapshots.end())
                {
                    apply_perturbation(manifest_.spec, it->second, {{cell, value}});
                    return;
                }
            }
        }
        fail(ErrorCode::StepNotStored, "no snapshot at step " + std::to_string(step));
    }

    // ------------------------------------------------------------ persistence

    std::string Store::segment_file_name(NodeId node, std::size_t piece_index) const
    {
        return "node" + to_string(node) + "_" + std::to_string(piece_index) + ".bsim";
    }

    void Store::write_segment(NodeId node, std::size_t piece_index, const SegmentRecord &seg) const
    {
        const auto &spec = manifest_.spec;
        Bytes out(segment_magic, segment_magic + sizeof(segment_magic));
        out.push_back(static_cast<std::uint8_t>(store_format_version & 0xff));
        out.push_back(static_cast<std::uint8_t>(store_format_version >> 8));

        Bytes header;
        write_le64(header, raw(node));
        write_le64(header, static_cast<std::uint64_t>(seg.start_step));
        write_le64(header, static_cast<std::uint64_t>(seg.end_step));
        write_le64(header, static_cast<std::uint64_t>(seg.checkpoint_interval));
        header.push_back(static_cast<std::uint8_t>(spec.simulator));
        write_le64(header, spec.width);
        write_le64(header, spec.height);
        write_block(out, tag_header, header);

        for (const auto &[step, state] : seg.snapshots)
        {
            Bytes payload;
            write_le64(payload, static_cast<std::uint64_t>(step));
            const Bytes cells = canonical_bytes(spec, state);
            payload.insert(payload.end(), cells.begin(), cells.end());
            write_block(out, tag_snapshot, payload);
        }
        for (const auto &delta : seg.deltas)
        {
            Bytes payload;
            write_le64(payload, static_cast<std::uint64_t>(delta.step_index));
            write_le64(payload, delta.entries.size());
            for (const auto &e : delta.entries)
            {
                write_le64(payload, e.index);
                write_value(spec, payload, e.value);
            }
            write_block(out, tag_delta, payload);
        }
        for (std::size_t k = 0; k < seg.step_digests.size(); ++k)
        {
            Bytes payload;
            write_le64(payload, static_cast<std::uint64_t>(seg.start_step + static_cast<std::int64_t>(k)));
            payload.insert(payload.end(), seg.step_digests[k].bytes.begin(), seg.step_digests[k].bytes.end());
            write_block(out, tag_digest, payload);
        }
        write_file_atomically(path_ / "segments" / segment_file_name(node, piece_index), out.data(), out.size());
    }

    SegmentRecord Store::read_segment(const fs::path &file) const
    {
        const auto &spec = manifest_.spec;
        std::ifstream in(file, std::ios::binary);
        if (!in)
        {
            fail(ErrorCode::CorruptStore, "missing segment file " + file.string());
        }
        const Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (data.size() < 8 || std::memcmp(data.data(), segment_magic, sizeof(segment_magic)) != 0)
        {
            fail(ErrorCode::CorruptStore, "bad magic in " + file.string());
        }
        const std::uint16_t version = static_cast<std::uint16_t>(data[6] | (data[7] << 8));
        if (version != store_format_version)
        {
            fail(ErrorCode::CorruptStore, "unsupported segment version " + std::to_string(version));
        }

        SegmentRecord seg;
        bool have_header = false;
        Reader r{data.data() + 8, data.data() + data.size()};
        while (r.p != r.end)
        {
            const std::uint8_t tag = r.u8();
            const std::uint64_t length = r.u64();
            r.need(length);
            Reader block{r.p, r.p + length};
            r.p += length;
            switch (tag)
            {
            case tag_header:
            {
                seg.node_id = static_cast<NodeId>(block.u64());
                seg.start_step = block.i64();
                seg.end_step = block.i64();
                seg.checkpoint_interval = block.i64();
                const auto sim = block.u8();
                const auto w = block.u64();
                const auto h = block.u64();
                if (sim != static_cast<std::uint8_t>(spec.simulator) || w != spec.width || h != spec.height ||
                    seg.end_step < seg.start_step || seg.checkpoint_interval <= 0)
                {
                    fail(ErrorCode::CorruptStore, "segment header inconsistent with manifest");
                }
                have_header = true;
                break;
            }
            case tag_snapshot:
            {
                const std::int64_t step = block.i64();
                seg.snapshots.emplace(step, state_from_bytes(spec, step, block.p,
                                                             static_cast<std::size_t>(block.end - block.p)));
                break;
            }
            case tag_delta:
            {
                StateDelta d;
                d.step_index = block.i64();
                const std::uint64_t count = block.u64();
                for (std::uint64_t k = 0; k < count; ++k)
                {
                    const CellIndex idx = block.u64();
                    if (idx >= spec.cell_count() || (!d.entries.empty() && idx <= d.entries.back().index))
                        fail(ErrorCode::CorruptStore, "delta indices out of order or range");
                    d.entries.push_back({idx, block.value(spec)});
                }
                seg.deltas.push_back(std::move(d));
                break;
            }
            case tag_digest:
            {
                block.i64();
                block.need(32);
                Digest dg;
                std::memcpy(dg.bytes.data(), block.p, 32);
                seg.step_digests.push_back(dg);
                break;
            }
            default:
                fail(ErrorCode::CorruptStore, "unknown block tag " + std::to_string(tag));
            }
        }
        const auto steps = static_cast<std::size_t>(seg.end_step - seg.start_step);
        if (!have_header || seg.deltas.size() != steps || seg.step_digests.size() != steps + 1 ||
            !seg.snapshots.contains(seg.start_step))
        {
            fail(ErrorCode::CorruptStore, "segment " + file.string() + " is incomplete");
        }
        for (std::size_t k = 0; k < steps; ++k)
        {
            if (seg.deltas[k].step_index != seg.start_step + static_cast<std::int64_t>(k) + 1)
                fail(ErrorCode::CorruptStore, "delta sequence broken in " + file.string());
        }
        seg.final_digest = seg.step_digests.back();
        return seg;
    }

    void Store::save()
    {
        if (path_.empty())
        {
            return;
        }
        std::lock_guard save_lock(save_mutex_);
        json manifest;
        manifest["format"] = "BSIM1";
        manifest["version"] = store_format_version;
        manifest["digest_algorithm"] = digest_algorithm_id;
        manifest["spec"] = spec_to_json(manifest_.spec);
        manifest["checkpoint_interval"] = manifest_.checkpoint_interval;
        json segments = json::array();
        {
            std::shared_lock lock(tracks_mutex_);
            for (const auto &[node, t] : tracks_)
            {
                std::shared_lock track_lock(t->mutex);
                json pieces = json::array();
                for (std::size_t k = 0; k < t->pieces.size(); ++k)
                {
                    const Piece &piece = t->pieces[k];
                    json entry{{"start", piece.start}, {"end", piece.end}};
                    if (const auto *link = std::get_if<SegmentLink>(&piece.body))
                    {
                        entry["kind"] = "link";
                        entry["donor"] = raw(link->donor);
                        entry["donor_start"] = link->donor_start;
                    }
                    else
                    {
                        const auto &seg = std::get<SegmentRecord>(piece.body);
                        entry["kind"] = "own";
                        entry["file"] = segment_file_name(node, k);
                        entry["final_digest"] = seg.final_digest.hex();
                        if (t->persisted_end[k] != piece.end)
                        {
                            write_segment(node, k, seg);
                            t->persisted_end[k] = piece.end;
                        }
                    }
                    pieces.push_back(std::move(entry));
                }
                segments.push_back(json{{"node", raw(node)}, {"pieces", std::move(pieces)}});
            }
        }
        manifest["segments"] = std::move(segments);
        {
            std::lock_guard lock(sections_mutex_);
            for (const auto &item : sections_.items())
                manifest[item.key()] = item.value();
        }
        const std::string text = manifest.dump(2);
        write_file_atomically(path_ / manifest_name, text.data(), text.size());
    }

    void Store::load()
    {
        const fs::path file = path_ / manifest_name;
        std::ifstream in(file);
        if (!in)
        {
            fail(ErrorCode::CorruptStore, "no BSIM1 manifest at " + path_.string());
        }
        json manifest;
        try
        {
            manifest = json::parse(in);
            if (manifest.at("format") != "BSIM1" || manifest.at("version") != store_format_version)
            {
                fail(ErrorCode::CorruptStore, "unsupported container format or version");
            }
            if (manifest.at("digest_algorithm") != digest_algorithm_id)
            {
                fail(ErrorCode::CorruptStore, "unsupported digest algorithm");
            }
            manifest_.spec = spec_from_json(manifest.at("spec"));
            manifest_.checkpoint_interval = manifest.at("checkpoint_interval").get<std::int64_t>();
        }
        catch (const json::exception &e)
        {
            fail(ErrorCode::CorruptStore, std::string("manifest unreadable: ") + e.what());
        }
        catch (const Error &e)
        {
            if (e.code() == ErrorCode::CorruptStore)
                throw;
            fail(ErrorCode::CorruptStore, e.what());
        }

        try
        {
            for (const auto &entry : manifest.at("segments"))
            {
                const auto node = static_cast<NodeId>(entry.at("node").get<std::uint64_t>());
                auto t = std::make_unique<Track>();
                for (const auto &pj : entry.at("pieces"))
                {
                    const auto start = pj.at("start").get<std::int64_t>();
                    const auto end = pj.at("end").get<std::int64_t>();
                    if (pj.at("kind") == "link")
                    {
                        t->pieces.push_back(Piece{start, end,
                                                  SegmentLink{static_cast<NodeId>(pj.at("donor").get<std::uint64_t>()),
                                                              pj.at("donor_start").get<std::int64_t>()}});
                    }
                    else
                    {
                        SegmentRecord seg = read_segment(path_ / "segments" / pj.at("file").get<std::string>());
                        if (seg.node_id != node || seg.start_step != start || seg.end_step != end ||
                            seg.final_digest.hex() != pj.at("final_digest").get<std::string>())
                        {
                            fail(ErrorCode::CorruptStore, "segment file disagrees with manifest");
                        }
                        t->pieces.push_back(Piece{start, end, std::move(seg)});
                    }
                    t->persisted_end.push_back(end);
                }
                if (t->pieces.empty() || t->pieces.front().is_link())
                {
                    fail(ErrorCode::CorruptStore, "track must begin with an own segment");
                }
                tracks_.emplace(node, std::move(t));
            }
        }
        catch (const json::exception &e)
        {
            fail(ErrorCode::CorruptStore, std::string("segment index unreadable: ") + e.what());
        }

        static const std::set<std::string> reserved = {"format", "version", "digest_algorithm", "spec",
                                                       "checkpoint_interval", "segments"};
        for (const auto &item : manifest.items())
        {
            if (!reserved.contains(item.key()))
                sections_[item.key()] = item.value();
        }
    }
}
