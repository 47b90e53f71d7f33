#pragma once

#include "bact/session.hpp"

#include <httplib.h>
#include <json.hpp>

#include <string>

namespace bact
{

namespace detail
{

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
}

inline void send_error(httplib::Response& res, int status, const std::string& error, const std::string& detail)
{
    send_json(res, status, {{"error", error}, {"detail", detail}});
}

inline nlohmann::json parse_body(const httplib::Request& req)
{
    try {
        auto j = nlohmann::json::parse(req.body);
        if (!j.is_object())
            throw ServiceError(400, "bad_request", "request body must be a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ServiceError(400, "bad_request", std::string("invalid JSON: ") + e.what());
    }
}

template<typename T>
T field(const nlohmann::json& body, const char* key)
{
    if (!body.contains(key))
        throw ServiceError(400, "bad_request", std::string("missing field '") + key + "'");
    try {
        return body.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ServiceError(400, "bad_request", std::string("field '") + key + "' has the wrong type");
    }
}

template<typename F>
auto guarded(F handler)
{
    return [handler](const httplib::Request& req, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        try {
            handler(req, res);
        } catch (const ServiceError& e) {
            send_error(res, e.status(), e.code(), e.what());
        } catch (const std::exception& e) {
            send_error(res, 400, "bad_request", e.what());
        }
    };
}

inline nlohmann::json request_to_json(const AnnotationRequest& r)
{
    const auto& q = r.query;
    return {{"request_id", q.video + "@" + std::to_string(q.center)},
            {"video", q.video},
            {"frame", q.center},
            {"clip", {q.interval.lo, q.interval.hi}},
            {"context", {{"heat_strip", r.heat_strip}, {"center_features", r.center_features}}}};
}

} // namespace detail

/// Registers the annotation API on `server`.
inline void install_routes(httplib::Server& server, AnnotationHub& hub)
{
    using nlohmann::json;
    using detail::guarded;

    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    server.Get("/classes", guarded([&](const httplib::Request&, httplib::Response& res) {
        json classes = json::array();
        for (std::size_t i = 0; i < hub.class_names().size(); ++i)
            classes.push_back({{"id", i}, {"name", hub.class_names()[i]}});
        detail::send_json(res, 200, {{"classes", classes}});
    }));

    server.Post("/sessions", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const auto body = detail::parse_body(req);
        const auto experiment = detail::field<std::string>(body, "experiment");
        const auto id = hub.create_session(experiment);
        const auto p = hub.progress(id);
        detail::send_json(res, 200,
                          {{"session", id}, {"experiment", experiment}, {"round", p.round}, {"total", p.total},
                           {"answered", p.answered}});
    }));

    server.Get("/sessions/:id/pending", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const auto& id = req.path_params.at("id");
        const auto items = hub.pending(id);
        const auto p = hub.progress(id);
        json pending = json::array();
        for (const auto& r : items)
            pending.push_back(detail::request_to_json(r));
        detail::send_json(res, 200,
                          {{"session", id},
                           {"round", p.round},
                           {"total", p.total},
                           {"answered", p.answered},
                           {"closed", p.closed},
                           {"class_names", hub.class_names()},
                           {"pending", pending}});
    }));

    server.Post("/sessions/:id/labels", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const auto& id = req.path_params.at("id");
        const auto body = detail::parse_body(req);
        const auto remaining = hub.submit(id, detail::field<std::string>(body, "video"), detail::field<int>(body, "frame"),
                                          detail::field<int>(body, "label"));
        detail::send_json(res, 200, {{"session", id}, {"remaining", remaining}});
    }));

    server.Post("/sessions/:id/cancel", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const auto& id = req.path_params.at("id");
        const auto answered = hub.cancel(id);
        detail::send_json(res, 200, {{"session", id}, {"cancelled", true}, {"answered", answered}});
    }));

    server.Get("/experiments/:id/history", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const auto& id = req.path_params.at("id");
        const auto h = hub.history(id);
        if (!h)
            throw ServiceError(404, "unknown_experiment", "no experiment '" + id + "'");
        detail::send_json(res, 200, *h);
    }));
}

} // namespace bact
