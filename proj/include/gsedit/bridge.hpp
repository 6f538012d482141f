#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"

#include "gsedit/oracle.hpp"

namespace gsedit {

enum class BridgeFailure {
    Spawn,     // process could not be started
    Timeout,   // no response within the configured time
    Protocol,  // malformed or unexpected message
    Exited,    // process ended; message carries its status
    Remote,    // request answered with ok = false
};

class BridgeError : public Error {
public:
    BridgeError(BridgeFailure failure, const std::string& message)
        : Error(ErrorKind::Oracle, message), failure_(failure) {}
    BridgeFailure failure() const noexcept { return failure_; }

private:
    BridgeFailure failure_;
};

// NumPy .npy files holding C×H×W tensors (little-endian, C order). Writes
// float32; reads float32 or float64 with 2 or 3 dimensions.
void write_npy(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_npy(const std::filesystem::path& path);

struct BridgeOptions {
    std::string command;              // run through /bin/sh -c
    std::filesystem::path workspace;  // exchanged files live here
    std::chrono::milliseconds timeout{120000};
};

/// Oracle client speaking newline-delimited JSON over a child process's
/// stdin/stdout. Requests: {"id","kind","inputs":{name:path},"params":{...}};
/// responses: {"id","ok","outputs":{...},"error"?}. Paths are relative to the
/// workspace. A {"kind":"hello"} request is sent first; a reply carrying
/// "alpha_bars" replaces the default noise schedule.
class BridgeClient : public NoisePredictor, public Editor, public DepthEstimator, public PerceptualMetric {
public:
    explicit BridgeClient(BridgeOptions options);
    ~BridgeClient() override;
    BridgeClient(const BridgeClient&) = delete;
    BridgeClient& operator=(const BridgeClient&) = delete;

    /// Handshake record (empty object when the bridge sent none).
    const nlohmann::json& handshake() const { return handshake_; }
    std::optional<NoiseSchedule> schedule() const;

    /// Sends one request and returns its "outputs" object.
    nlohmann::json call(const std::string& kind, const std::map<std::string, std::string>& inputs,
                        const nlohmann::json& params);

    nlohmann::json echo(const nlohmann::json& params) { return call("echo", {}, params); }

    Tensor predict_noise(const NoiseQuery& query) override;
    RgbImage edit(const EditQuery& query) override;
    ScalarImage disparity(const RgbImage& image, int view) override;
    double distance(const RgbImage& rendered, const RgbImage& target, RgbImage* grad) override;

    Oracles oracles();

private:
    std::string write_line_and_wait(const std::string& line, long long id);
    std::string read_line();
    std::filesystem::path resolve(const nlohmann::json& outputs, const std::string& key) const;
    std::string stage_path(const std::string& name) const;
    void shutdown();
    [[noreturn]] void fail_exited();

    BridgeOptions options_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    long long next_id_ = 1;
    nlohmann::json handshake_ = nlohmann::json::object();
};

}  // namespace gsedit
