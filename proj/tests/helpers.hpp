#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace cfqp::testing {

class TempDir {
public:
    TempDir() {
        auto base = std::filesystem::temp_directory_path();
        std::random_device rd;
        path_ = base / ("cfqp-test-" + std::to_string(rd()) + "-" + std::to_string(::getpid()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

    void write_file(const std::string& name, const std::string& content) const {
        auto file = path_ / name;
        std::filesystem::create_directories(file.parent_path());
        std::ofstream out(file, std::ios::binary | std::ios::trunc);
        out << content;
    }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Local HTTP stub implementing the chat and embedding wire contracts, with
// optional injected failures.
class StubServer {
public:
    StubServer() : server_(std::make_unique<httplib::Server>()) {
        using nlohmann::json;
        server_->Post("/chat", [this](const httplib::Request& req, httplib::Response& res) {
            ++chat_requests_;
            if (chat_fail_count_ > 0) {
                --chat_fail_count_;
                res.status = 500;
                res.set_content("injected failure", "text/plain");
                return;
            }
            last_chat_body_ = req.body;
            json out;
            out["choices"] = json::array();
            out["choices"].push_back({{"message", {{"content", chat_reply_}}}});
            res.set_content(out.dump(), "application/json");
        });
        server_->Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
            ++embed_requests_;
            if (embed_fail_count_ > 0) {
                --embed_fail_count_;
                res.status = 500;
                res.set_content("injected failure", "text/plain");
                return;
            }
            json in = json::parse(req.body, nullptr, false);
            json out;
            out["data"] = json::array();
            for (const auto& item : in["input"]) {
                std::string s = item.get<std::string>();
                std::vector<double> v(embed_dim_, 0.0);
                // Cheap deterministic vector: byte histogram into buckets.
                for (unsigned char c : s) v[c % embed_dim_] += 1.0;
                out["data"].push_back({{"embedding", v}});
            }
            res.set_content(out.dump(), "application/json");
        });
        port_ = server_->bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_->listen_after_bind(); });
        server_->wait_until_ready();
    }

    ~StubServer() {
        server_->stop();
        if (thread_.joinable()) thread_.join();
    }

    std::string chat_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/chat"; }
    std::string embed_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/embed"; }

    void set_chat_reply(std::string reply) { chat_reply_ = std::move(reply); }
    void fail_next_chat(int n) { chat_fail_count_ = n; }
    void fail_next_embed(int n) { embed_fail_count_ = n; }
    void set_embed_dim(std::size_t d) { embed_dim_ = d; }

    int chat_requests() const { return chat_requests_.load(); }
    int embed_requests() const { return embed_requests_.load(); }
    std::string last_chat_body() const { return last_chat_body_; }

private:
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
    std::string chat_reply_ = "ok";
    std::string last_chat_body_;
    std::atomic<int> chat_requests_{0};
    std::atomic<int> embed_requests_{0};
    std::atomic<int> chat_fail_count_{0};
    std::atomic<int> embed_fail_count_{0};
    std::size_t embed_dim_ = 16;
};

}  // namespace cfqp::testing
