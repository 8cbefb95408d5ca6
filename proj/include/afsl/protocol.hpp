#pragma once

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "afsl/trainer.hpp"

namespace afsl {

/// Trainer protocol failure, tagged with what went wrong so callers can
/// distinguish a slow trainer from a malformed one.
class ProtocolError : public std::runtime_error {
public:
    enum class Kind { io, version_mismatch, validation, exit_status, timeout };

    ProtocolError(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

namespace protocol {

namespace detail {

inline void require_finite(double v, const char* what) {
    if (!std::isfinite(v))
        throw ProtocolError(ProtocolError::Kind::validation,
                            std::string(what) + ": non-finite value");
}

inline nlohmann::json labels_to_names(const LabelIndexSet& labels, const LabelSet& label_set) {
    auto arr = nlohmann::json::array();
    for (int l : labels) arr.push_back(label_set.labels.at(static_cast<std::size_t>(l)));
    return arr;
}

inline LabelIndexSet names_to_labels(const nlohmann::json& names, const LabelSet& label_set) {
    LabelIndexSet out;
    for (const auto& n : names) {
        const int idx = label_set.index_of(n.get<std::string>());
        if (idx < 0)
            throw ProtocolError(ProtocolError::Kind::validation,
                                "unknown label name '" + n.get<std::string>() + "'");
        out.push_back(idx);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<nlohmann::json> read_records(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ProtocolError(ProtocolError::Kind::io, "cannot open protocol file '" + path + "'");
    std::vector<nlohmann::json> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            records.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(ProtocolError::Kind::validation,
                                path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (records.empty())
        throw ProtocolError(ProtocolError::Kind::validation, "protocol file '" + path + "' is empty");
    return records;
}

inline void check_version(const nlohmann::json& header, const std::string& path) {
    const std::string version = header.value("version", "");
    if (version != kProtocolVersion)
        throw ProtocolError(ProtocolError::Kind::version_mismatch,
                            path + ": protocol version '" + version + "' does not match '" +
                                std::string(kProtocolVersion) + "'");
}

}  // namespace detail

// -- request ----------------------------------------------------------------

inline void write_request(const TrainRequest& request, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ProtocolError(ProtocolError::Kind::io, "cannot write request file '" + path + "'");
    nlohmann::json header;
    header["record"] = "header";
    header["version"] = kProtocolVersion;
    header["request_id"] = request.request_id;
    header["iteration"] = request.iteration;
    header["labels"] = request.label_set.labels;
    header["multi_label"] = request.label_set.multi_label;
    if (request.label_set.vocab) {
        header["class_token_ids"] = request.label_set.vocab->token_ids;
        header["single_token_substitutions"] = request.label_set.vocab->substitutions;
    }
    out << header.dump() << '\n';
    for (const auto& entry : request.support) {
        nlohmann::json j{{"record", "support"},
                         {"id", entry.id},
                         {"labels", detail::labels_to_names(entry.labels, request.label_set)}};
        out << j.dump() << '\n';
    }
    for (SampleId id : request.pool_ids)
        out << nlohmann::json{{"record", "pool"}, {"id", id}}.dump() << '\n';
    for (SampleId id : request.validation_ids)
        out << nlohmann::json{{"record", "validation"}, {"id", id}}.dump() << '\n';
    for (SampleId id : request.evaluation_ids)
        out << nlohmann::json{{"record", "evaluation"}, {"id", id}}.dump() << '\n';
}

inline TrainRequest read_request(const std::string& path) {
    const auto records = detail::read_records(path);
    const auto& header = records.front();
    if (header.value("record", "") != "header")
        throw ProtocolError(ProtocolError::Kind::validation,
                            path + ": first record must be the header");
    detail::check_version(header, path);

    TrainRequest request;
    request.request_id = header.value("request_id", "");
    request.iteration = header.value("iteration", std::size_t{0});
    request.label_set.labels = header.at("labels").get<std::vector<std::string>>();
    request.label_set.multi_label = header.value("multi_label", false);
    if (header.contains("class_token_ids")) {
        LabelVocabMap vm;
        vm.token_ids = header["class_token_ids"].get<std::vector<std::int64_t>>();
        if (header.contains("single_token_substitutions"))
            vm.substitutions =
                header["single_token_substitutions"].get<std::map<std::string, std::string>>();
        request.label_set.vocab = std::move(vm);
    }
    request.label_set.validate();

    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& j = records[i];
        const std::string kind = j.value("record", "");
        if (kind == "support") {
            SupportEntry entry;
            entry.id = j.at("id").get<SampleId>();
            entry.labels = detail::names_to_labels(j.at("labels"), request.label_set);
            request.support.push_back(std::move(entry));
        } else if (kind == "pool") {
            request.pool_ids.push_back(j.at("id").get<SampleId>());
        } else if (kind == "validation") {
            request.validation_ids.push_back(j.at("id").get<SampleId>());
        } else if (kind == "evaluation") {
            request.evaluation_ids.push_back(j.at("id").get<SampleId>());
        } else {
            throw ProtocolError(ProtocolError::Kind::validation,
                                path + ": unknown record type '" + kind + "'");
        }
    }
    return request;
}

// -- response ---------------------------------------------------------------

inline void write_response(const TrainerResponse& response, const LabelSet& label_set,
                           const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ProtocolError(ProtocolError::Kind::io, "cannot write response file '" + path + "'");
    nlohmann::json header;
    header["record"] = "header";
    header["version"] = kProtocolVersion;
    header["request_id"] = response.request_id;
    header["status"] = "ok";
    header["cold_start"] = response.cold_start;
    header["timings"] = {{"fine_tune_seconds", response.timings.fine_tune_seconds},
                         {"inference_seconds", response.timings.inference_seconds}};
    out << header.dump() << '\n';
    for (const auto& inf : response.pool_inference) {
        for (double v : inf.en) detail::require_finite(v, "en vector");
        for (double v : inf.logits.data()) detail::require_finite(v, "logits");
        nlohmann::json j;
        j["record"] = "inference";
        j["id"] = inf.id;
        j["en"] = inf.en;
        auto rows = nlohmann::json::array();
        for (std::size_t t = 0; t < inf.logits.rows(); ++t) {
            auto row = nlohmann::json::array();
            for (double v : inf.logits.row(t)) row.push_back(v);
            rows.push_back(std::move(row));
        }
        j["logits"] = std::move(rows);
        out << j.dump() << '\n';
    }
    for (const auto& [id, labels] : response.predictions) {
        nlohmann::json j{{"record", "prediction"},
                         {"id", id},
                         {"labels", detail::labels_to_names(labels, label_set)}};
        out << j.dump() << '\n';
    }
}

inline TrainerResponse read_response(const std::string& path, const LabelSet& label_set) {
    const auto records = detail::read_records(path);
    const auto& header = records.front();
    if (header.value("record", "") != "header")
        throw ProtocolError(ProtocolError::Kind::validation,
                            path + ": first record must be the header");
    detail::check_version(header, path);

    TrainerResponse response;
    response.request_id = header.value("request_id", "");
    response.cold_start = header.value("cold_start", false);
    if (header.contains("timings")) {
        response.timings.fine_tune_seconds = header["timings"].value("fine_tune_seconds", 0.0);
        response.timings.inference_seconds = header["timings"].value("inference_seconds", 0.0);
    }
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& j = records[i];
        const std::string kind = j.value("record", "");
        try {
            if (kind == "inference") {
                SampleInference inf;
                inf.id = j.at("id").get<SampleId>();
                inf.en = j.at("en").get<std::vector<double>>();
                for (double v : inf.en) detail::require_finite(v, "en vector");
                const auto& rows = j.at("logits");
                if (!rows.is_array() || rows.empty())
                    throw ProtocolError(ProtocolError::Kind::validation,
                                        "logits must be a non-empty T x N array");
                inf.logits = Matrix(rows.size(), rows.front().size());
                for (std::size_t t = 0; t < rows.size(); ++t) {
                    if (rows[t].size() != inf.logits.cols())
                        throw ProtocolError(ProtocolError::Kind::validation,
                                            "ragged logits for sample " + std::to_string(inf.id));
                    for (std::size_t n = 0; n < inf.logits.cols(); ++n) {
                        inf.logits(t, n) = rows[t][n].get<double>();
                        detail::require_finite(inf.logits(t, n), "logits");
                    }
                }
                response.pool_inference.push_back(std::move(inf));
            } else if (kind == "prediction") {
                response.predictions.emplace_back(
                    j.at("id").get<SampleId>(), detail::names_to_labels(j.at("labels"), label_set));
            } else {
                throw ProtocolError(ProtocolError::Kind::validation,
                                    path + ": unknown record type '" + kind + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(ProtocolError::Kind::validation,
                                path + " record " + std::to_string(i) + ": " + e.what());
        }
    }
    return response;
}

/// Response sanity against the request: exactly one inference per pool id,
/// exactly one prediction per evaluation id, constant en dimension, and an
/// N that matches the label set.
inline void validate_response(const TrainerResponse& response, const TrainRequest& request) {
    if (response.request_id != request.request_id)
        throw ProtocolError(ProtocolError::Kind::validation,
                            "response request_id '" + response.request_id +
                                "' does not match request '" + request.request_id + "'");

    std::unordered_set<SampleId> wanted(request.pool_ids.begin(), request.pool_ids.end());
    std::unordered_set<SampleId> seen;
    std::size_t dim = 0;
    for (const auto& inf : response.pool_inference) {
        if (!wanted.count(inf.id))
            throw ProtocolError(ProtocolError::Kind::validation,
                                "inference for id " + std::to_string(inf.id) +
                                    " was not requested");
        if (!seen.insert(inf.id).second)
            throw ProtocolError(ProtocolError::Kind::validation,
                                "duplicate inference for id " + std::to_string(inf.id));
        if (inf.logits.cols() != request.label_set.size())
            throw ProtocolError(ProtocolError::Kind::validation,
                                "sample " + std::to_string(inf.id) + " has " +
                                    std::to_string(inf.logits.cols()) +
                                    " logit columns, label set has " +
                                    std::to_string(request.label_set.size()));
        if (dim == 0)
            dim = inf.en.size();
        else if (inf.en.size() != dim)
            throw ProtocolError(ProtocolError::Kind::validation,
                                "sample " + std::to_string(inf.id) +
                                    " en dimension differs within the response");
    }
    for (SampleId id : request.pool_ids)
        if (!seen.count(id))
            throw ProtocolError(ProtocolError::Kind::validation,
                                "response is missing inference for pool id " + std::to_string(id));

    std::unordered_set<SampleId> eval_wanted(request.evaluation_ids.begin(),
                                             request.evaluation_ids.end());
    std::unordered_set<SampleId> eval_seen;
    for (const auto& [id, labels] : response.predictions) {
        if (!eval_wanted.count(id))
            throw ProtocolError(ProtocolError::Kind::validation,
                                "prediction for id " + std::to_string(id) + " was not requested");
        if (!eval_seen.insert(id).second)
            throw ProtocolError(ProtocolError::Kind::validation,
                                "duplicate prediction for id " + std::to_string(id));
        if (labels.empty())
            throw ProtocolError(ProtocolError::Kind::validation,
                                "empty prediction for id " + std::to_string(id));
    }
    for (SampleId id : request.evaluation_ids)
        if (!eval_seen.count(id))
            throw ProtocolError(ProtocolError::Kind::validation,
                                "response is missing prediction for evaluation id " +
                                    std::to_string(id));
}

// -- subprocess -------------------------------------------------------------

/// Whitespace tokenization with single/double quote groups; no variable
/// expansion or escapes.
inline std::vector<std::string> split_command(const std::string& command) {
    std::vector<std::string> argv;
    std::string current;
    char quote = 0;
    bool in_token = false;
    for (char c : command) {
        if (quote) {
            if (c == quote)
                quote = 0;
            else
                current += c;
        } else if (c == '\'' || c == '"') {
            quote = c;
            in_token = true;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            if (in_token) {
                argv.push_back(current);
                current.clear();
                in_token = false;
            }
        } else {
            current += c;
            in_token = true;
        }
    }
    if (in_token) argv.push_back(current);
    return argv;
}

struct SubprocessResult {
    int exit_status = -1;
    std::string stdout_text;
};

inline SubprocessResult run_subprocess(const std::vector<std::string>& argv,
                                       double timeout_seconds) {
    if (argv.empty())
        throw ProtocolError(ProtocolError::Kind::io, "empty trainer command");

    int fds[2];
    if (pipe(fds) != 0) throw ProtocolError(ProtocolError::Kind::io, "pipe() failed");

    const pid_t pid = fork();
    if (pid < 0) {
        close(fds[0]);
        close(fds[1]);
        throw ProtocolError(ProtocolError::Kind::io, "fork() failed");
    }
    if (pid == 0) {
        dup2(fds[1], STDOUT_FILENO);
        close(fds[0]);
        close(fds[1]);
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        execvp(args[0], args.data());
        _exit(127);
    }
    close(fds[1]);

    SubprocessResult result;
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
    char buf[4096];
    bool timed_out = false;
    pollfd pfd{fds[0], POLLIN, 0};
    while (true) {
        const auto remaining = deadline - std::chrono::steady_clock::now();
        if (remaining <= std::chrono::steady_clock::duration::zero()) {
            timed_out = true;
            break;
        }
        const int wait_ms = static_cast<int>(std::min<std::int64_t>(
            250, std::chrono::duration_cast<std::chrono::milliseconds>(remaining).count() + 1));
        const int rv = poll(&pfd, 1, wait_ms);
        if (rv < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (rv == 0) continue;  // poll slice elapsed, re-check the deadline
        const ssize_t n = read(fds[0], buf, sizeof(buf));
        if (n > 0)
            result.stdout_text.append(buf, static_cast<std::size_t>(n));
        else
            break;  // EOF: child closed stdout
    }
    close(fds[0]);

    if (timed_out) {
        kill(pid, SIGKILL);
        waitpid(pid, nullptr, 0);
        throw ProtocolError(ProtocolError::Kind::timeout,
                            "trainer '" + argv[0] + "' exceeded the " +
                                std::to_string(timeout_seconds) + " s timeout");
    }
    int status = 0;
    waitpid(pid, &status, 0);
    result.exit_status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

}  // namespace protocol

/// Adapter that drives an external trainer process through the file
/// protocol. Each call writes iter_<k>/request under the working directory,
/// invokes `command <request-path>`, and expects the process to announce its
/// output with a `RESPONSE <path>` line on stdout.
class ExternalTrainer : public Trainer {
public:
    ExternalTrainer(std::string command, std::filesystem::path workdir,
                    double timeout_seconds = 3600.0)
        : command_(std::move(command)), workdir_(std::move(workdir)),
          timeout_seconds_(timeout_seconds) {}

    TrainerResponse run(const TrainRequest& request) override {
        const std::filesystem::path dir =
            workdir_ / ("iter_" + std::to_string(request.iteration));
        std::filesystem::create_directories(dir);
        const std::string request_path = (dir / "request").string();
        protocol::write_request(request, request_path);

        std::vector<std::string> argv = protocol::split_command(command_);
        argv.push_back(request_path);
        const auto result = protocol::run_subprocess(argv, timeout_seconds_);
        if (result.exit_status != 0)
            throw ProtocolError(ProtocolError::Kind::exit_status,
                                "trainer exited with status " +
                                    std::to_string(result.exit_status));

        const std::string response_path = find_response_path(result.stdout_text);
        TrainerResponse response = protocol::read_response(response_path, request.label_set);
        protocol::validate_response(response, request);
        return response;
    }

private:
    static std::string find_response_path(const std::string& stdout_text) {
        std::istringstream in(stdout_text);
        std::string line, path;
        while (std::getline(in, line)) {
            if (line.rfind("RESPONSE ", 0) == 0) path = line.substr(9);
        }
        if (path.empty())
            throw ProtocolError(ProtocolError::Kind::validation,
                                "trainer did not announce a response path "
                                "(expected a 'RESPONSE <path>' line on stdout)");
        while (!path.empty() && (path.back() == '\r' || path.back() == ' ')) path.pop_back();
        return path;
    }

    std::string command_;
    std::filesystem::path workdir_;
    double timeout_seconds_;
};

/// The serving side: reads a request file, runs the given trainer, writes the
/// response next to the request, and announces it. Used by the CLI trainer
/// subcommand; reusable by any in-tree trainer implementation.
inline std::string serve_request(Trainer& trainer, const std::string& request_path,
                                 std::ostream& announce) {
    const TrainRequest request = protocol::read_request(request_path);
    TrainerResponse response = trainer.run(request);
    const std::filesystem::path out_path =
        std::filesystem::path(request_path).parent_path() / "response";
    protocol::write_response(response, request.label_set, out_path.string());
    announce << "RESPONSE " << out_path.string() << "\n";
    return out_path.string();
}

}  // namespace afsl
