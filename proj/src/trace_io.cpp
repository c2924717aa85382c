#include "kwfp/trace_io.hpp"

#include <fstream>

#include "json.hpp"

namespace kwfp {

using ordered_json = nlohmann::ordered_json;

namespace {

void expect_keys(const ordered_json& obj, std::initializer_list<const char*> allowed,
                 const char* where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) { ok = true; break; }
        if (!ok) throw ParseError(std::string("unknown field \"") + it.key() + "\" in " + where);
    }
}

const ordered_json& need(const ordered_json& obj, const char* key, const char* where) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw ParseError(std::string("missing field \"") + key + "\" in " + where);
    return *it;
}

int64_t as_int(const ordered_json& j, const char* what) {
    if (!j.is_number_integer())
        throw ParseError(std::string(what) + " must be an integer");
    return j.get<int64_t>();
}

std::string as_str(const ordered_json& j, const char* what) {
    if (!j.is_string()) throw ParseError(std::string(what) + " must be a string");
    return j.get<std::string>();
}

}  // namespace

std::string sample_to_json_line(const TraceSample& sample) {
    ordered_json meta;
    meta["label"] = sample.meta.keyword_label;
    meta["engine"] = sample.meta.search_engine;
    meta["browser"] = sample.meta.browser;
    meta["mode"] = search_mode_string(sample.meta.mode);
    meta["capture_start_us"] = sample.meta.capture_start_us;
    if (sample.meta.first_keystroke_us)
        meta["first_keystroke_us"] = *sample.meta.first_keystroke_us;
    meta["visit_index"] = sample.meta.visit_index;

    ordered_json conns = ordered_json::array();
    for (const Connection& c : sample.connections) {
        ordered_json jc;
        if (c.server_name) jc["server_name"] = *c.server_name;
        jc["port"] = c.server_port;
        jc["pre_typing"] = c.established_before_typing;
        ordered_json pkts = ordered_json::array();
        for (const PacketRecord& p : c.packets)
            pkts.push_back({p.ts_us, std::string(1, direction_char(p.dir)), p.size});
        jc["packets"] = std::move(pkts);
        conns.push_back(std::move(jc));
    }

    ordered_json root;
    root["meta"] = std::move(meta);
    root["connections"] = std::move(conns);
    return root.dump();
}

TraceSample sample_from_json_line(const std::string& line, size_t line_number) {
    const std::string ctx = "line " + std::to_string(line_number);
    ordered_json root;
    try {
        root = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(ctx + ": not valid JSON: " + e.what());
    }
    try {
        if (!root.is_object()) throw ParseError("sample must be a JSON object");
        expect_keys(root, {"meta", "connections"}, "sample");
        const ordered_json& jm = need(root, "meta", "sample");
        expect_keys(jm,
                    {"label", "engine", "browser", "mode", "capture_start_us",
                     "first_keystroke_us", "visit_index"},
                    "meta");

        SampleMeta meta;
        meta.keyword_label = as_str(need(jm, "label", "meta"), "meta.label");
        meta.search_engine = as_str(need(jm, "engine", "meta"), "meta.engine");
        meta.browser = as_str(need(jm, "browser", "meta"), "meta.browser");
        meta.mode = search_mode_from_string(as_str(need(jm, "mode", "meta"), "meta.mode"));
        meta.capture_start_us = as_int(need(jm, "capture_start_us", "meta"), "meta.capture_start_us");
        if (jm.contains("first_keystroke_us"))
            meta.first_keystroke_us = as_int(jm["first_keystroke_us"], "meta.first_keystroke_us");
        meta.visit_index =
            static_cast<int32_t>(as_int(need(jm, "visit_index", "meta"), "meta.visit_index"));

        const ordered_json& jconns = need(root, "connections", "sample");
        if (!jconns.is_array()) throw ParseError("connections must be an array");

        std::vector<Connection> conns;
        conns.reserve(jconns.size());
        for (size_t ci = 0; ci < jconns.size(); ++ci) {
            const ordered_json& jc = jconns[ci];
            if (!jc.is_object()) throw ParseError("connection must be a JSON object");
            expect_keys(jc, {"server_name", "port", "pre_typing", "packets"}, "connection");
            Connection conn;
            conn.conn_id = static_cast<int32_t>(ci);
            if (jc.contains("server_name"))
                conn.server_name = as_str(jc["server_name"], "connection.server_name");
            conn.server_port = static_cast<int32_t>(as_int(need(jc, "port", "connection"), "connection.port"));
            const ordered_json& jpre = need(jc, "pre_typing", "connection");
            if (!jpre.is_boolean()) throw ParseError("connection.pre_typing must be a boolean");
            conn.established_before_typing = jpre.get<bool>();
            const ordered_json& jpkts = need(jc, "packets", "connection");
            if (!jpkts.is_array()) throw ParseError("connection.packets must be an array");
            conn.packets.reserve(jpkts.size());
            for (const ordered_json& jp : jpkts) {
                if (!jp.is_array() || jp.size() != 3)
                    throw ParseError("packet must be a [ts_us, dir, size] triple");
                PacketRecord p;
                p.ts_us = as_int(jp[0], "packet ts_us");
                std::string dir = as_str(jp[1], "packet dir");
                if (dir.size() != 1)
                    throw ParseError("packet dir must be \"+\" or \"-\"");
                p.dir = direction_from_char(dir[0]);
                p.size = static_cast<int32_t>(as_int(jp[2], "packet size"));
                conn.packets.push_back(p);
            }
            conns.push_back(std::move(conn));
        }

        TraceSample sample{std::move(meta), std::move(conns)};
        auto violations = validate_sample(sample);
        if (!violations.empty())
            throw ValidationError(ctx + ": " + to_string(violations.front()));
        return sample;
    } catch (const ValidationError&) {
        throw;
    } catch (const ParseError& e) {
        std::string msg = e.what();
        if (msg.rfind(ctx, 0) == 0) throw;
        throw ParseError(ctx + ": " + msg);
    }
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    Dataset ds;
    ds.provenance = path.string();
    std::string line;
    size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ds.samples.push_back(sample_from_json_line(line, line_number));
    }
    return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const TraceSample& s : dataset.samples) out << sample_to_json_line(s) << '\n';
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace kwfp
