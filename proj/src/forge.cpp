#include "imagery/forge.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include "imagery/error.hpp"
#include "imagery/random.hpp"
#include "json.hpp"

namespace imagery {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void GenerationConstraints::validate() const {
    if (max_height < 1 || max_width < 1 || max_depth < 1) throw ConfigError("extent limits must be at least 1");
    if (min_cubes < 1 || min_cubes > max_cubes) throw ConfigError("cube count range is empty");
    if (static_cast<long long>(max_height) * max_width * max_depth < min_cubes)
        throw ConfigError("no polycube with " + std::to_string(min_cubes) + " cubes fits in " +
                          std::to_string(max_width) + "x" + std::to_string(max_height) + "x" +
                          std::to_string(max_depth));
}

bool GenerationConstraints::admits(const Polycube& p) const {
    const VoxelCoord e = p.extent();
    const auto n = static_cast<int>(p.size());
    return e.x <= max_width && e.y <= max_height && e.z <= max_depth && n >= min_cubes && n <= max_cubes;
}

namespace {

constexpr int kSteps[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};

VoxelCoord step(const VoxelCoord& c, int k) { return {c.x + kSteps[k][0], c.y + kSteps[k][1], c.z + kSteps[k][2]}; }

bool fits(const std::vector<VoxelCoord>& cells, const GenerationConstraints& c) {
    VoxelCoord lo = cells[0], hi = cells[0];
    for (const auto& v : cells) {
        lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
        hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
    }
    return hi.x - lo.x < c.max_width && hi.y - lo.y < c.max_height && hi.z - lo.z < c.max_depth;
}

}  // namespace

Polycube generate_polycube(std::uint64_t seed, const GenerationConstraints& constraints) {
    constraints.validate();
    Rng rng(seed);
    const int target = rng.between(constraints.min_cubes, constraints.max_cubes);
    std::vector<VoxelCoord> cells{{0, 0, 0}};
    std::set<VoxelCoord> occupied(cells.begin(), cells.end());
    for (int tries = 0; static_cast<int>(cells.size()) < target; ++tries) {
        if (tries > 100000) throw GenerationError(seed, "growth stalled");
        const VoxelCoord next = step(rng.pick(cells), static_cast<int>(rng.below(6)));
        if (occupied.contains(next)) continue;
        cells.push_back(next);
        if (!fits(cells, constraints)) {
            cells.pop_back();
            continue;
        }
        occupied.insert(next);
    }
    return normalize(Polycube(cells));
}

std::vector<Pose> default_pose_pool() {
    std::vector<Pose> pool;
    for (double heading : {30.0, 60.0, 120.0, 150.0, 210.0, 240.0, 300.0, 330.0})
        pool.push_back(apply_camera_rotation(pose_from_euler({0, heading, 0}), {Direction::down, 30}));
    return pool;
}

bool pose_shows_three_faces(const Pose& pose, double min_fraction) {
    const Polycube cube({VoxelCoord{}});
    const auto faces = visible_faces(cube, pose);
    std::size_t total = 0;
    for (const auto& f : faces) total += f.pixels;
    int shown = 0;
    for (const auto& f : faces) shown += static_cast<double>(f.pixels) >= min_fraction * static_cast<double>(total);
    return shown == 3;
}

const Polycube& Problem::object(ObjectLabel l) const {
    return l == ObjectLabel::original ? original : options[option_index(l)];
}

bool Problem::operator==(const Problem& o) const {
    if (id != o.id || original != o.original || options != o.options || odd != o.odd || statement != o.statement)
        return false;
    for (std::size_t i = 0; i < calibrated_poses.size(); ++i) {
        const Quat& a = calibrated_poses[i].orientation;
        const Quat& b = o.calibrated_poses[i].orientation;
        if (a.w != b.w || a.x != b.x || a.y != b.y || a.z != b.z) return false;
    }
    return true;
}

bool audit_problem(const Problem& p) {
    int failures = 0;
    for (ObjectLabel l : kOptionLabels) {
        const bool equivalent = rotation_equivalent(p.original, p.object(l));
        if (!equivalent) ++failures;
        if (equivalent == (l == p.odd)) return false;
    }
    return failures == 1;
}

namespace {

// Moves one cube to a new face-adjacent spot so the result is no longer a
// rotation of the input.
std::optional<Polycube> one_cube_edit(const Polycube& base, const GenerationConstraints& constraints, Rng& rng) {
    std::set<std::vector<VoxelCoord>> seen;
    std::vector<Polycube> candidates;
    const auto& cells = base.cells();
    for (std::size_t drop = 0; drop < cells.size(); ++drop) {
        std::vector<VoxelCoord> rest = cells;
        rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(drop));
        if (!is_face_connected(rest)) continue;
        const std::set<VoxelCoord> occupied(rest.begin(), rest.end());
        for (const auto& c : rest) {
            for (int k = 0; k < 6; ++k) {
                const VoxelCoord added = step(c, k);
                if (added == cells[drop] || occupied.contains(added)) continue;
                std::vector<VoxelCoord> moved = rest;
                moved.push_back(added);
                const Polycube candidate = normalize(Polycube(moved));
                if (!constraints.admits(candidate) || !seen.insert(candidate.cells()).second) continue;
                if (!rotation_equivalent(candidate, base)) candidates.push_back(candidate);
            }
        }
    }
    if (candidates.empty()) return std::nullopt;
    return rng.pick(candidates);
}

bool every_cube_visible(const Polycube& p, const Pose& pose, const ForgeOptions& o) {
    std::vector<std::size_t> pixels(p.size(), 0);
    for (const auto& f : visible_faces(p, pose, o.rig, o.settings)) pixels[f.cell] += f.pixels;
    return std::all_of(pixels.begin(), pixels.end(), [&](std::size_t n) { return n >= o.min_visible_pixels; });
}

std::optional<Pose> pick_view(const Polycube& p, const ForgeOptions& o, Rng& rng) {
    std::vector<std::size_t> order(o.pose_pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t i : order)
        if (every_cube_visible(p, o.pose_pool[i], o)) return o.pose_pool[i];
    return std::nullopt;
}

std::string default_id(std::uint64_t seed) { return "s" + std::to_string(seed); }

}  // namespace

Problem make_problem(std::uint64_t seed, const ForgeOptions& options, std::string id) {
    options.constraints.validate();
    if (options.option_rotations.empty() || options.pose_pool.empty())
        throw ConfigError("forge needs at least one option rotation and one pose");
    for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(attempt)));
        Problem p;
        p.id = id.empty() ? default_id(seed) : id;
        p.original = generate_polycube(rng.next(), options.constraints);
        p.odd = kOptionLabels[rng.below(3)];

        std::optional<Polycube> odd_shape;
        if (is_chiral(p.original))
            odd_shape = mirror(p.original);
        else
            odd_shape = one_cube_edit(p.original, options.constraints, rng);
        if (!odd_shape) continue;

        bool ok = true;
        for (ObjectLabel l : kOptionLabels) {
            const Polycube& base = l == p.odd ? *odd_shape : p.original;
            p.options[option_index(l)] = normalize(rotate(base, rng.pick(options.option_rotations)));
            ok = ok && options.constraints.admits(p.options[option_index(l)]);
        }
        for (ObjectLabel l : kAllLabels) {
            if (!ok) break;
            const auto view = pick_view(p.object(l), options, rng);
            if (view)
                p.pose(l) = *view;
            else
                ok = false;
        }
        if (ok && audit_problem(p)) return p;
    }
    throw GenerationError(seed, "no valid problem after " + std::to_string(options.max_attempts) + " attempts");
}

RasterImage render_object(const Problem& p, ObjectLabel l, const CameraRig& rig, const RenderSettings& settings) {
    return render(p.object(l), p.pose(l), rig, settings);
}

RasterImage render_problem(const Problem& p, const CameraRig& rig, const RenderSettings& settings) {
    std::vector<std::pair<RasterImage, std::string>> cells;
    for (ObjectLabel l : kAllLabels) cells.emplace_back(render_object(p, l, rig, settings), to_string(l));
    return compose_grid(cells);
}

const Problem& ProblemSet::find(std::string_view id) const {
    for (const auto& p : problems)
        if (p.id == id) return p;
    throw ContractError("no problem with id '" + std::string(id) + "'");
}

ProblemSet make_problem_set(std::uint64_t seed, std::size_t count, const ForgeOptions& options) {
    ProblemSet set;
    set.seed = seed;
    set.constraints = options.constraints;
    char buf[32];
    for (std::size_t i = 0; i < count; ++i) {
        std::snprintf(buf, sizeof buf, "p%03zu", i);
        set.problems.push_back(make_problem(Rng::derive(seed, i), options, buf));
    }
    return set;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

namespace {

std::span<const std::uint8_t> as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::vector<std::uint8_t> read_bytes(const fs::path& path, const std::string& name) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(name, "cannot open");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

using FileHashes = std::map<std::string, std::string>;

void put(const fs::path& dir, const std::string& rel, std::span<const std::uint8_t> bytes, FileHashes& hashes) {
    write_atomic(dir / rel, bytes);
    hashes[rel] = sha256_hex(bytes);
}

std::string object_file(const Problem& p, ObjectLabel l) { return "objects/" + p.id + "_" + to_string(l) + ".cells"; }
std::string tile_file(const Problem& p, ObjectLabel l) { return "images/" + p.id + "_" + to_string(l) + ".png"; }
std::string composite_file(const Problem& p) { return "images/" + p.id + ".png"; }

void write_images(const Problem& p, const fs::path& dir, const CameraRig& rig, const RenderSettings& settings,
                  FileHashes& hashes) {
    std::vector<std::pair<RasterImage, std::string>> cells;
    for (ObjectLabel l : kAllLabels) {
        RasterImage tile = render_object(p, l, rig, settings);
        put(dir, tile_file(p, l), encode_png(tile), hashes);
        cells.emplace_back(std::move(tile), to_string(l));
    }
    put(dir, composite_file(p), encode_png(compose_grid(cells)), hashes);
}

ordered_json quat_json(const Quat& q) { return ordered_json::array({q.w, q.x, q.y, q.z}); }

void write_poses(const ProblemSet& set, const fs::path& dir, FileHashes& hashes) {
    ordered_json poses = ordered_json::object();
    for (const auto& p : set.problems)
        for (ObjectLabel l : kAllLabels) poses[p.id][to_string(l)] = quat_json(p.pose(l).orientation);
    put(dir, "poses.json", as_bytes(poses.dump(2) + "\n"), hashes);
}

ordered_json constraints_json(const GenerationConstraints& c) {
    return {{"max_height", c.max_height}, {"max_width", c.max_width},   {"max_depth", c.max_depth},
            {"min_cubes", c.min_cubes},   {"max_cubes", c.max_cubes}};
}

void write_manifest(const ProblemSet& set, const fs::path& dir, const FileHashes& hashes) {
    ordered_json m;
    m["format"] = "imagery-problem-set";
    m["version"] = set.version;
    m["seed"] = set.seed;
    m["constraints"] = constraints_json(set.constraints);
    m["problems"] = ordered_json::array();
    for (const auto& p : set.problems) {
        ordered_json entry{{"id", p.id}, {"odd", to_string(p.odd)}, {"statement", p.statement}};
        for (ObjectLabel l : kAllLabels) entry["objects"][to_string(l)] = object_file(p, l);
        entry["images"]["problem"] = composite_file(p);
        for (ObjectLabel l : kAllLabels) entry["images"][to_string(l)] = tile_file(p, l);
        m["problems"].push_back(std::move(entry));
    }
    m["poses"] = "poses.json";
    m["files"] = hashes;
    m["checksum"] = sha256_hex(as_bytes(m.dump()));
    write_atomic(dir / "manifest.json", as_bytes(m.dump(2) + "\n"));
}

}  // namespace

std::string problem_set_checksum(const ProblemSet& set) {
    ordered_json j;
    j["version"] = set.version;
    j["seed"] = set.seed;
    j["constraints"] = constraints_json(set.constraints);
    j["problems"] = ordered_json::array();
    for (const auto& p : set.problems) {
        ordered_json e{{"id", p.id}, {"odd", to_string(p.odd)}};
        for (ObjectLabel l : kAllLabels) {
            e["cells"][to_string(l)] = to_text(p.object(l));
            e["pose"][to_string(l)] = quat_json(p.pose(l).orientation);
        }
        j["problems"].push_back(std::move(e));
    }
    return sha256_hex(as_bytes(j.dump()));
}

namespace {

ordered_json read_manifest(const fs::path& dir) {
    const auto bytes = read_bytes(dir / "manifest.json", "manifest.json");
    ordered_json m;
    try {
        m = ordered_json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("manifest.json", e.what());
    }
    if (!m.is_object() || !m.contains("checksum") || !m["checksum"].is_string())
        throw LoadError("manifest.json", "missing checksum");
    const std::string recorded = m["checksum"].get<std::string>();
    m.erase("checksum");
    if (sha256_hex(as_bytes(m.dump())) != recorded) throw LoadError("manifest.json", "checksum mismatch");
    return m;
}

}  // namespace

void save_problem_set(const ProblemSet& set, const fs::path& dir, const CameraRig& rig,
                      const RenderSettings& settings) {
    fs::create_directories(dir / "objects");
    fs::create_directories(dir / "images");
    FileHashes hashes;
    for (const auto& p : set.problems) {
        for (ObjectLabel l : kAllLabels) put(dir, object_file(p, l), as_bytes(to_text(p.object(l))), hashes);
        write_images(p, dir, rig, settings, hashes);
    }
    write_poses(set, dir, hashes);
    write_manifest(set, dir, hashes);
}

ProblemSet load_problem_set(const fs::path& dir) {
    const ordered_json m = read_manifest(dir);
    ProblemSet set;
    FileHashes hashes;
    try {
        if (m.at("format") != "imagery-problem-set") throw LoadError("manifest.json", "unknown format");
        set.version = m.at("version").get<int>();
        if (set.version != kProblemSetVersion)
            throw LoadError("manifest.json", "unsupported version " + std::to_string(set.version));
        set.seed = m.at("seed").get<std::uint64_t>();
        const auto& c = m.at("constraints");
        set.constraints = {c.at("max_height").get<int>(), c.at("max_width").get<int>(), c.at("max_depth").get<int>(),
                           c.at("min_cubes").get<int>(), c.at("max_cubes").get<int>()};
        hashes = m.at("files").get<FileHashes>();
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("manifest.json", e.what());
    }

    std::map<std::string, std::vector<std::uint8_t>> contents;
    for (const auto& [rel, digest] : hashes) {
        auto bytes = read_bytes(dir / rel, rel);
        if (sha256_hex(bytes) != digest) throw LoadError(rel, "hash mismatch");
        contents.emplace(rel, std::move(bytes));
    }
    auto text_of = [&](const std::string& rel) -> std::string {
        const auto it = contents.find(rel);
        if (it == contents.end()) throw LoadError(rel, "not listed in manifest");
        return {it->second.begin(), it->second.end()};
    };

    ordered_json poses;
    try {
        poses = ordered_json::parse(text_of("poses.json"));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("poses.json", e.what());
    }

    try {
        for (const auto& entry : m.at("problems")) {
            Problem p;
            p.id = entry.at("id").get<std::string>();
            p.statement = entry.at("statement").get<std::string>();
            const auto odd = label_from_string(entry.at("odd").get<std::string>());
            if (!odd || *odd == ObjectLabel::original) throw LoadError("manifest.json", "bad odd label for " + p.id);
            p.odd = *odd;
            for (ObjectLabel l : kAllLabels) {
                const std::string rel = entry.at("objects").at(to_string(l)).get<std::string>();
                try {
                    const Polycube cube = polycube_from_text(text_of(rel));
                    if (l == ObjectLabel::original)
                        p.original = cube;
                    else
                        p.options[option_index(l)] = cube;
                } catch (const DecodeError& e) {
                    throw LoadError(rel, e.what());
                } catch (const ContractError& e) {
                    throw LoadError(rel, e.what());
                }
                for (const char* key : {"problem", to_string(l)})
                    if (!contents.contains(entry.at("images").at(key).get<std::string>()))
                        throw LoadError(entry.at("images").at(key).get<std::string>(), "not listed in manifest");
                try {
                    const auto& q = poses.at(p.id).at(to_string(l));
                    p.pose(l) = Pose{Quat{q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                                          q.at(3).get<double>()}};
                } catch (const nlohmann::json::exception& e) {
                    throw LoadError("poses.json", p.id + ": " + e.what());
                }
            }
            set.problems.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("manifest.json", e.what());
    }
    return set;
}

void update_problem_poses(const ProblemSet& set, const std::string& problem_id, const fs::path& dir,
                          const CameraRig& rig, const RenderSettings& settings) {
    const ordered_json m = read_manifest(dir);
    FileHashes hashes = m.at("files").get<FileHashes>();
    write_images(set.find(problem_id), dir, rig, settings, hashes);
    write_poses(set, dir, hashes);
    write_manifest(set, dir, hashes);
}

ProbePair make_probe_pair(const Polycube& object, const RotationCommand& applied, const Pose& base_pose,
                          const CameraRig& rig, const RenderSettings& settings) {
    ProbePair pair;
    pair.object = object;
    pair.base_pose = base_pose;
    pair.applied = applied;
    pair.before = render(object, base_pose, rig, settings);
    pair.after = render(object, apply_camera_rotation(base_pose, applied), rig, settings);
    return pair;
}

void SweepSpec::validate() const {
    if (axes.empty()) throw ConfigError("sweep needs at least one axis");
    for (Direction d : axes)
        if (d == Direction::reset) throw ConfigError("reset is not a sweep axis");
    if (!(step_deg > 0) || !(end_deg > start_deg)) throw ConfigError("sweep range must be increasing");
    const double steps = (end_deg - start_deg) / step_deg;
    if (std::abs(steps - std::round(steps)) > 1e-9) throw ConfigError("sweep step must divide the range");
}

std::vector<double> SweepSpec::angles() const {
    validate();
    const auto n = static_cast<int>(std::round((end_deg - start_deg) / step_deg));
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(start_deg + i * step_deg);
    return out;
}

std::vector<ProbePair> make_sweep_dataset(const Polycube& object, const Pose& base_pose, const SweepSpec& spec,
                                          const CameraRig& rig, const RenderSettings& settings) {
    std::vector<ProbePair> pairs;
    const auto angles = spec.angles();
    for (Direction d : spec.axes)
        for (double a : angles) pairs.push_back(make_probe_pair(object, {d, a}, base_pose, rig, settings));
    return pairs;
}

namespace {

std::string motion_phrase(const RotationCommand& c) {
    switch (c.direction) {
        case Direction::left: return "to the left about the vertical axis";
        case Direction::right: return "to the right about the vertical axis";
        case Direction::up: return "upward about the horizontal axis";
        case Direction::down: return "downward about the horizontal axis";
        case Direction::cw: return "clockwise within the image plane";
        case Direction::ccw: return "counterclockwise within the image plane";
        case Direction::reset: break;
    }
    return "";
}

}  // namespace

GenerationProbe make_generation_probe(const Polycube& object, const Pose& base_pose, const RotationCommand& command,
                                      const CameraRig& rig, const RenderSettings& settings) {
    if (command.direction == Direction::reset) throw ContractError("generation probes need a rotation");
    GenerationProbe g;
    g.command = command;
    g.input = render(object, base_pose, rig, settings);
    g.ground_truth = render(object, apply_camera_rotation(base_pose, command), rig, settings);
    char angle[32];
    std::snprintf(angle, sizeof angle, "%g", command.angle);
    g.instruction = "The image shows an object built from equal cubes. Generate an image of the same object "
                    "rotated by " + std::string(angle) + " degrees " + motion_phrase(command) +
                    ". Keep the camera, framing, colors and background unchanged.";
    return g;
}

void save_probe_pairs(const std::vector<ProbePair>& pairs, const fs::path& dir) {
    fs::create_directories(dir / "images");
    ordered_json doc = ordered_json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        char stem[32];
        std::snprintf(stem, sizeof stem, "images/q%04zu", i);
        const std::string before = std::string(stem) + "_before.png", after = std::string(stem) + "_after.png";
        write_atomic(dir / before, encode_png(p.before));
        write_atomic(dir / after, encode_png(p.after));
        doc.push_back({{"object", to_text(p.object)},
                       {"base_pose", quat_json(p.base_pose.orientation)},
                       {"applied", p.ground_truth()},
                       {"before", before},
                       {"after", after}});
    }
    write_atomic(dir / "probes.json", as_bytes(doc.dump(2) + "\n"));
}

std::vector<ProbePair> load_probe_pairs(const fs::path& dir) {
    const auto bytes = read_bytes(dir / "probes.json", "probes.json");
    std::vector<ProbePair> out;
    try {
        for (const auto& e : ordered_json::parse(bytes.begin(), bytes.end())) {
            ProbePair p;
            p.object = polycube_from_text(e.at("object").get<std::string>());
            const auto& q = e.at("base_pose");
            p.base_pose = Pose{Quat{q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                                    q.at(3).get<double>()}};
            p.applied = parse_command(e.at("applied").get<std::string>());
            for (auto [key, img] : {std::pair{"before", &p.before}, std::pair{"after", &p.after}}) {
                const std::string rel = e.at(key).get<std::string>();
                try {
                    *img = decode_png(read_bytes(dir / rel, rel));
                } catch (const DecodeError& err) {
                    throw LoadError(rel, err.what());
                }
            }
            out.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("probes.json", e.what());
    } catch (const ParseError& e) {
        throw LoadError("probes.json", e.what());
    } catch (const DecodeError& e) {
        throw LoadError("probes.json", e.what());
    }
    return out;
}

}  // namespace imagery
