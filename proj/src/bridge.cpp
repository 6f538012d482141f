#include "gsedit/bridge.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <regex>

namespace gsedit {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// .npy

void write_npy(const fs::path& path, const Tensor& t) {
    std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + std::to_string(t.channels) + ", " +
                         std::to_string(t.height) + ", " + std::to_string(t.width) + "), }";
    const std::size_t prefix = 10;
    const std::size_t total = (prefix + header.size() + 1 + 63) / 64 * 64;
    header.append(total - prefix - header.size() - 1, ' ');
    header.push_back('\n');
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Input, "cannot write " + path.string());
    const std::uint16_t len = static_cast<std::uint16_t>(header.size());
    out.write("\x93NUMPY\x01\x00", 8);
    const char len_bytes[2] = {static_cast<char>(len & 0xFF), static_cast<char>(len >> 8)};
    out.write(len_bytes, 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (double v : t.data) {
        const float f = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f), sizeof f);
    }
    if (!out) fail(ErrorKind::Input, "failed writing " + path.string());
}

Tensor read_npy(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Input, "cannot open " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0) fail(ErrorKind::Format, path.string() + ": not an npy file");
    std::size_t header_len = 0;
    if (magic[6] == 1) {
        unsigned char b[2];
        in.read(reinterpret_cast<char*>(b), 2);
        header_len = b[0] | (b[1] << 8);
    } else {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        header_len = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::size_t>(b[3]) << 24);
    }
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) fail(ErrorKind::Format, path.string() + ": truncated npy header");

    std::smatch m;
    if (!std::regex_search(header, m, std::regex("'descr':\\s*'([<|=])f([48])'")))
        fail(ErrorKind::Format, path.string() + ": unsupported npy dtype");
    const int width = m[2] == "4" ? 4 : 8;
    if (std::regex_search(header, std::regex("'fortran_order':\\s*True")))
        fail(ErrorKind::Format, path.string() + ": fortran-order npy not supported");
    if (!std::regex_search(header, m, std::regex("'shape':\\s*\\(([^)]*)\\)")))
        fail(ErrorKind::Format, path.string() + ": npy header has no shape");
    std::vector<int> dims;
    const std::string shape = m[1];
    const std::regex number("\\d+");
    for (std::sregex_iterator it(shape.begin(), shape.end(), number), end; it != end; ++it)
        dims.push_back(std::stoi(it->str()));
    if (dims.size() == 2) dims.insert(dims.begin(), 1);
    if (dims.size() != 3) fail(ErrorKind::Format, path.string() + ": expected a 2D or 3D array");

    Tensor t(dims[0], dims[1], dims[2]);
    for (double& v : t.data) {
        if (width == 4) {
            float f;
            in.read(reinterpret_cast<char*>(&f), 4);
            v = f;
        } else {
            in.read(reinterpret_cast<char*>(&v), 8);
        }
    }
    if (!in) fail(ErrorKind::Format, path.string() + ": truncated npy data");
    return t;
}

// ---------------------------------------------------------------------------
// Process plumbing

BridgeClient::BridgeClient(BridgeOptions options) : options_(std::move(options)) {
    if (options_.command.empty()) throw BridgeError(BridgeFailure::Spawn, "bridge command is empty");
    fs::create_directories(options_.workspace);
    options_.workspace = fs::canonical(options_.workspace);
    ::signal(SIGPIPE, SIG_IGN);

    int in_pipe[2], out_pipe[2];
    if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0)
        throw BridgeError(BridgeFailure::Spawn, std::string("pipe: ") + std::strerror(errno));
    pid_ = ::fork();
    if (pid_ < 0) throw BridgeError(BridgeFailure::Spawn, std::string("fork: ") + std::strerror(errno));
    if (pid_ == 0) {
        ::setpgid(0, 0);
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        if (::chdir(options_.workspace.c_str()) != 0) ::_exit(127);
        ::execl("/bin/sh", "sh", "-c", options_.command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::setpgid(pid_, pid_);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
    ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);

    try {
        const long long id = next_id_++;
        const json reply = json::parse(write_line_and_wait(json{{"id", id}, {"kind", "hello"}}.dump(), id));
        if (reply.value("kind", "") == "hello" || reply.value("ok", false)) {
            handshake_ = reply;
            handshake_.erase("id");
        }
    } catch (...) {
        shutdown();
        throw;
    }
}

BridgeClient::~BridgeClient() { shutdown(); }

void BridgeClient::shutdown() {
    if (to_child_ >= 0) ::close(to_child_);
    to_child_ = -1;
    if (pid_ > 0) {
        int status = 0;
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(pid_, &status, WNOHANG) == pid_) {
                pid_ = -1;
                break;
            }
            ::usleep(20000);
        }
        if (pid_ > 0) {
            ::kill(-pid_, SIGKILL);
            ::waitpid(pid_, &status, 0);
            pid_ = -1;
        }
    }
    if (from_child_ >= 0) ::close(from_child_);
    from_child_ = -1;
}

void BridgeClient::fail_exited() {
    int status = 0;
    std::string detail = "bridge process exited";
    if (pid_ > 0 && ::waitpid(pid_, &status, 0) == pid_) {
        pid_ = -1;
        if (WIFEXITED(status))
            detail += " with status " + std::to_string(WEXITSTATUS(status));
        else if (WIFSIGNALED(status))
            detail += " on signal " + std::to_string(WTERMSIG(status));
    }
    shutdown();
    throw BridgeError(BridgeFailure::Exited, detail);
}

std::string BridgeClient::read_line() {
    const auto deadline = std::chrono::steady_clock::now() + options_.timeout;
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        if (from_child_ < 0) fail_exited();
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            if (pid_ > 0) ::kill(-pid_, SIGKILL);
            shutdown();
            throw BridgeError(BridgeFailure::Timeout, "bridge did not respond within " +
                                                          std::to_string(options_.timeout.count()) + " ms");
        }
        pollfd pfd{from_child_, POLLIN, 0};
        const int r = ::poll(&pfd, 1, static_cast<int>(left.count()));
        if (r < 0 && errno == EINTR) continue;
        if (r == 0) continue;
        char chunk[4096];
        const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) fail_exited();
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

std::string BridgeClient::write_line_and_wait(const std::string& line, long long id) {
    if (to_child_ < 0) fail_exited();
    const std::string msg = line + "\n";
    std::size_t off = 0;
    while (off < msg.size()) {
        const ssize_t n = ::write(to_child_, msg.data() + off, msg.size() - off);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) fail_exited();
        off += static_cast<std::size_t>(n);
    }
    for (;;) {
        const std::string reply = read_line();
        json j;
        try {
            j = json::parse(reply);
        } catch (const json::exception& e) {
            throw BridgeError(BridgeFailure::Protocol, "malformed bridge message: " + std::string(e.what()));
        }
        if (!j.is_object()) throw BridgeError(BridgeFailure::Protocol, "bridge message is not a JSON object");
        const auto it = j.find("id");
        if (it != j.end() && it->is_number_integer() && it->get<long long>() == id) return reply;
        // An unsolicited handshake may precede the first reply.
        if (j.value("kind", "") == "hello") {
            handshake_ = j;
            continue;
        }
        throw BridgeError(BridgeFailure::Protocol, "unexpected bridge message: " + reply);
    }
}

std::optional<NoiseSchedule> BridgeClient::schedule() const {
    const auto it = handshake_.find("alpha_bars");
    if (it == handshake_.end()) return std::nullopt;
    try {
        return NoiseSchedule::from_alpha_bars(it->get<std::vector<double>>());
    } catch (const json::exception& e) {
        throw BridgeError(BridgeFailure::Protocol, "handshake alpha_bars: " + std::string(e.what()));
    }
}

json BridgeClient::call(const std::string& kind, const std::map<std::string, std::string>& inputs, const json& params) {
    const long long id = next_id_++;
    const json request{{"id", id}, {"kind", kind}, {"inputs", inputs}, {"params", params}};
    const json reply = json::parse(write_line_and_wait(request.dump(), id));
    const auto ok = reply.find("ok");
    if (ok == reply.end() || !ok->is_boolean())
        throw BridgeError(BridgeFailure::Protocol, "bridge reply to '" + kind + "' lacks boolean 'ok'");
    if (!ok->get<bool>()) {
        const auto err = reply.find("error");
        throw BridgeError(BridgeFailure::Remote, "bridge failed '" + kind + "': " +
                                                     (err != reply.end() ? err->dump() : std::string("no detail")));
    }
    const auto out = reply.find("outputs");
    if (out == reply.end()) return json::object();
    if (!out->is_object()) throw BridgeError(BridgeFailure::Protocol, "bridge 'outputs' is not an object");
    return *out;
}

std::filesystem::path BridgeClient::resolve(const json& outputs, const std::string& key) const {
    const auto it = outputs.find(key);
    if (it == outputs.end() || !it->is_string())
        throw BridgeError(BridgeFailure::Protocol, "bridge reply lacks output path '" + key + "'");
    const fs::path rel = it->get<std::string>();
    const fs::path full = (options_.workspace / rel).lexically_normal();
    const auto [a, b] = std::mismatch(options_.workspace.begin(), options_.workspace.end(), full.begin(), full.end());
    if (rel.is_absolute() || a != options_.workspace.end())
        throw BridgeError(BridgeFailure::Protocol, "bridge output path escapes the workspace: " + rel.string());
    if (!fs::exists(full)) throw BridgeError(BridgeFailure::Protocol, "bridge output missing: " + rel.string());
    return full;
}

std::string BridgeClient::stage_path(const std::string& name) const {
    fs::create_directories(options_.workspace / "io");
    return (fs::path("io") / ("r" + std::to_string(next_id_) + "_" + name)).string();
}

// ---------------------------------------------------------------------------
// Oracle kinds

Tensor BridgeClient::predict_noise(const NoiseQuery& q) {
    const std::string image = stage_path("image.png");
    write_png(options_.workspace / image, *q.image);
    const json out = call("predict_noise", {{"image", image}},
                          {{"prompt", q.prompt}, {"tau", q.tau}, {"seed", q.seed}, {"view", q.view}});
    return read_npy(resolve(out, "noise"));
}

RgbImage BridgeClient::edit(const EditQuery& q) {
    const std::string original = stage_path("original.png");
    const std::string coarse = stage_path("coarse.png");
    write_png(options_.workspace / original, *q.original);
    write_png(options_.workspace / coarse, *q.coarse);
    const json out = call("edit", {{"original", original}, {"coarse", coarse}},
                          {{"prompt", q.prompt}, {"t", q.start_t}, {"w", q.guidance}, {"seed", q.seed}, {"view", q.view}});
    RgbImage result = read_png(resolve(out, "image"));
    if (!result.same_shape(*q.coarse))
        throw BridgeError(BridgeFailure::Protocol, "edited image resolution differs from the request");
    return result;
}

ScalarImage BridgeClient::disparity(const RgbImage& image, int view) {
    const std::string path = stage_path("image.png");
    write_png(options_.workspace / path, image);
    const json out = call("disparity", {{"image", path}}, {{"view", view}});
    ScalarImage d = read_pfm_scalar(resolve(out, "disparity"));
    if (!d.same_shape(image)) throw BridgeError(BridgeFailure::Protocol, "disparity resolution differs from the request");
    return d;
}

double BridgeClient::distance(const RgbImage& rendered, const RgbImage& target, RgbImage* grad) {
    const std::string a = stage_path("rendered.pfm");
    const std::string b = stage_path("target.pfm");
    write_pfm(options_.workspace / a, rendered);
    write_pfm(options_.workspace / b, target);
    const json out = call("perceptual", {{"rendered", a}, {"target", b}}, {{"gradient", grad != nullptr}});
    const auto v = out.find("value");
    if (v == out.end() || !v->is_number()) throw BridgeError(BridgeFailure::Protocol, "perceptual reply lacks 'value'");
    if (grad) {
        *grad = read_pfm_rgb(resolve(out, "grad"));
        if (!grad->same_shape(rendered)) throw BridgeError(BridgeFailure::Protocol, "perceptual gradient shape mismatch");
    }
    return v->get<double>();
}

Oracles BridgeClient::oracles() {
    Oracles o;
    o.noise = this;
    o.editor = this;
    o.depth = this;
    o.perceptual = this;
    if (auto s = schedule()) o.schedule = *s;
    return o;
}

}  // namespace gsedit
