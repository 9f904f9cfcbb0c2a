#pragma once

#include <charconv>
#include <cstdint>
#include <string>

#include "httplib.h"
// <resolv.h> (pulled in by httplib) defines _res, which Eigen uses as an identifier.
#ifdef _res
#undef _res
#endif
#include "json.hpp"
#include "wsseg/annotation_json.hpp"
#include "wsseg/png_io.hpp"
#include "wsseg/service/annotation_service.hpp"

// JSON over HTTP:
//   GET  /api/images?status=          [{image_id, status, height, width}]
//   GET  /api/images/{id}/raster      8-bit PNG
//   POST /api/annotations             AnnotationRecord -> {accepted, version}
//   GET  /api/progress                {total, point_done, squiggle_done}
//   GET  /api/export?scheme=&n=&seed= export document
// Errors are {error, path} with status 400, or 404 for unknown images.

namespace wsseg::service {

namespace detail {

inline void send_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message,
                       const std::string& path, nlohmann::json extra = nlohmann::json::object()) {
  extra["error"] = message;
  extra["path"] = path;
  send_json(res, extra, status);
}

inline bool parse_u64(const std::string& s, std::uint64_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size() && !s.empty();
}

}  // namespace detail

class HttpServer {
 public:
  explicit HttpServer(AnnotationService& service) : service_(service) { routes(); }

  /// Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host = "127.0.0.1", int port = 0) {
    if (port == 0) return port_ = server_.bind_to_any_port(host);
    if (!server_.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return port_ = port;
  }

  /// Serves until stop() is called. Call bind() first.
  void run() { server_.listen_after_bind(); }
  void wait_until_ready() const { server_.wait_until_ready(); }
  void stop() { server_.stop(); }
  int port() const { return port_; }

 private:
  void routes() {
    using httplib::Request;
    using httplib::Response;
    server_.Get("/api/images", [this](const Request& req, Response& res) {
      std::optional<ImageStatus> filter;
      if (req.has_param("status")) {
        const auto value = req.get_param_value("status");
        if (!value.empty()) {
          filter = parse_status(value);
          if (!filter) return detail::send_error(res, 400, "unknown status '" + value + "'", "status");
        }
      }
      nlohmann::json out = nlohmann::json::array();
      for (const auto& i : service_.list_images(filter))
        out.push_back({{"image_id", i.image_id},
                       {"status", std::string(to_string(i.status))},
                       {"height", i.height},
                       {"width", i.width}});
      detail::send_json(res, out);
    });

    server_.Get("/api/images/:id/raster", [this](const Request& req, Response& res) {
      try {
        const auto& img = service_.image(req.path_params.at("id"));
        const auto png = encode_image_png(img.pixels, 8);
        res.set_content(std::string(png.begin(), png.end()), "image/png");
      } catch (const UnknownImageError& e) {
        detail::send_error(res, 404, e.what(), "image_id");
      }
    });

    server_.Post("/api/annotations", [this](const Request& req, Response& res) {
      try {
        const auto r = service_.submit(deserialize_annotation(req.body));
        detail::send_json(res, {{"accepted", r.accepted}, {"version", r.version}});
      } catch (const SchemaError& e) {
        detail::send_error(res, 400, e.what(), e.path());
      } catch (const ValidationError& e) {
        detail::send_error(res, 400, e.what(), e.path());
      } catch (const UnknownImageError& e) {
        detail::send_error(res, 404, e.what(), "image_id");
      } catch (const Error& e) {
        detail::send_error(res, 400, e.what(), "");
      }
    });

    server_.Get("/api/progress", [this](const Request&, Response& res) {
      const auto p = service_.progress();
      detail::send_json(res, {{"total", p.total},
                              {"point_done", p.point_done},
                              {"squiggle_done", p.squiggle_done}});
    });

    server_.Get("/api/export", [this](const Request& req, Response& res) {
      const auto scheme_text = req.get_param_value("scheme");
      const auto scheme = parse_scheme(scheme_text);
      if (!scheme || *scheme == Scheme::masked_dense)
        return detail::send_error(res, 400, "scheme must be point_n10 or squiggle_n32", "scheme");
      std::uint64_t n = 32, seed = 0;
      if (req.has_param("n") && (!detail::parse_u64(req.get_param_value("n"), n) || n > 1000000))
        return detail::send_error(res, 400, "n must be an integer in [2, 1000000]", "n");
      if (req.has_param("seed") && !detail::parse_u64(req.get_param_value("seed"), seed))
        return detail::send_error(res, 400, "seed must be a non-negative integer", "seed");
      try {
        const auto doc = service_.export_dataset(*scheme, static_cast<int>(n), seed);
        res.set_content(serialize_export(doc), "application/json");
      } catch (const IncompleteError& e) {
        detail::send_error(res, 400, e.what(), "images", {{"missing", e.missing_ids()}});
      } catch (const Error& e) {
        detail::send_error(res, 400, e.what(), "n");
      }
    });
  }

  AnnotationService& service_;
  httplib::Server server_;
  int port_ = 0;
};

}  // namespace wsseg::service
