#include "cfqp/http.hpp"

#include <httplib.h>

#include "cfqp/errors.hpp"

namespace cfqp::http {

std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint URL must include a scheme: " + url);
    }
    std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw ConfigError("unsupported URL scheme '" + scheme + "' in " + url);
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

PostFn default_post() {
    return [](const Request& req) -> Response {
        Response res;
        try {
            auto [origin, path] = split_url(req.url);
            httplib::Client cli(origin);
            auto secs = std::chrono::duration_cast<std::chrono::seconds>(req.timeout);
            if (secs.count() < 1) secs = std::chrono::seconds(1);
            cli.set_connection_timeout(secs.count(), 0);
            cli.set_read_timeout(secs.count(), 0);
            cli.set_write_timeout(secs.count(), 0);
            httplib::Headers headers;
            for (const auto& [k, v] : req.headers) headers.emplace(k, v);
            auto r = cli.Post(path, headers, req.body, "application/json");
            if (!r) {
                res.error = httplib::to_string(r.error());
                res.timed_out = (r.error() == httplib::Error::ConnectionTimeout ||
                                 r.error() == httplib::Error::Read ||
                                 r.error() == httplib::Error::Write);
                return res;
            }
            res.status = r->status;
            res.body = r->body;
            return res;
        } catch (const std::exception& e) {
            res.error = e.what();
            return res;
        }
    };
}

}  // namespace cfqp::http
