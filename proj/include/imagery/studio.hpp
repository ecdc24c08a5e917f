#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "imagery/render.hpp"

namespace httplib {
class Server;
}

namespace imagery {

struct StudioConfig {
    std::filesystem::path dataset;
    /// answers.jsonl and downloadable transcript bundles.
    std::filesystem::path state_dir = "studio_state";
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    /// Forbids calibration nudges and commits.
    bool read_only = false;
    /// Human sessions may answer from the first iteration.
    int human_min_iterations = 1;
    int human_max_iterations = 60;
    /// Used when calibration rewrites the dataset images.
    CameraRig rig;
    RenderSettings settings;
};

/// JSON and PNG endpoints under /v1/ over the shared session core:
///
///   GET  /v1/problems
///   GET  /v1/problems/{id}/image                      composite PNG
///   GET  /v1/problems/{id}/objects/{label}.png
///   POST /v1/sessions                                 {problem_id, condition, overrides, player}
///   GET  /v1/sessions/{sid}
///   GET  /v1/sessions/{sid}/context
///   POST /v1/sessions/{sid}/turns                     agent reply; 409 when stale
///   POST /v1/sessions/{sid}/objects/{label}/commands  "left:30,up:15" -> grid PNG; 422 on parse error
///   GET  /v1/sessions/{sid}/objects/{label}/snapshot.png
///   GET  /v1/sessions/{sid}/iterations/{k}/{label}.png
///   POST /v1/sessions/{sid}/answer                    {answer, player}; appended to answers.jsonl
///   GET  /v1/sessions/{sid}/transcript                transcript.json
///   GET  /v1/sessions/{sid}/bundle                    file list of the transcript directory
///   GET  /v1/sessions/{sid}/bundle/{path}
///   GET  /v1/calibration/{id}/{label}
///   GET  /v1/calibration/{id}/{label}/render.png
///   POST /v1/calibration/{id}/{label}/nudge           command -> PNG; 403 when read-only
///   POST /v1/calibration/{id}/{label}/commit          {author}
///   POST /v1/calibration/{id}/{label}/revert
class StudioService {
public:
    /// Loads the dataset; throws LoadError when it is missing or corrupt.
    explicit StudioService(StudioConfig config);
    ~StudioService();

    StudioService(const StudioService&) = delete;
    StudioService& operator=(const StudioService&) = delete;

    /// Binds and serves on a background thread; returns the bound port.
    /// Throws ConfigError when the port is busy.
    int start();
    /// Binds and serves on the calling thread until stop().
    void listen();
    void stop();

    httplib::Server& server();

private:
    struct State;
    std::unique_ptr<State> state_;
};

}  // namespace imagery
