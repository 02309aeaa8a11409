#include "tmkl/io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "tmkl/util.hpp"

namespace tmkl {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open '" + path + "'");
    return f;
}

LabelMap parse_labels(const std::string& path) {
    auto f = open_or_throw(path);
    std::string line;
    std::size_t lineno = 0;
    LabelMap out;
    while (std::getline(f, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) continue;
        if (lineno == 1) {
            if (line.rfind("id,label", 0) != 0)
                throw ValidationError(path + " line 1: expected header 'id,label'");
            continue;
        }
        const auto parts = split(line, ',');
        if (parts.size() < 2)
            throw ValidationError(path + " line " + std::to_string(lineno) + ": expected id,label");
        try {
            out[parts[0]] = stance_from_string(parts[1]);
        } catch (const ValidationError& e) {
            throw ValidationError(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace

LabelMap load_labels_csv(const std::string& path) { return parse_labels(path); }

EmbeddingTable load_embeddings_tsv(const std::string& path, int expected_dim) {
    auto f = open_or_throw(path);
    EmbeddingTable table;
    table.dim = static_cast<std::size_t>(expected_dim);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto parts = split(line, '\t');
        if (parts.size() != table.dim + 1)
            throw ValidationError(path + " line " + std::to_string(lineno) + ": expected token + " +
                                  std::to_string(table.dim) + " values, got " +
                                  std::to_string(parts.size() - 1));
        std::vector<double> v(table.dim);
        for (std::size_t i = 0; i < table.dim; ++i) {
            char* end = nullptr;
            v[i] = std::strtod(parts[i + 1].c_str(), &end);
            if (end == parts[i + 1].c_str())
                throw ValidationError(path + " line " + std::to_string(lineno) +
                                      ": bad float in column " + std::to_string(i + 2));
        }
        table.entries[parts[0]] = std::move(v);
    }
    return table;
}

LoadResult load_dataset(const LoadPaths& paths, const LoadOptions& opts) {
    LoadResult result;
    Dataset& ds = result.dataset;
    ds.announcement_ts = opts.announcement_ts;
    ds.horizon_days = opts.horizon_days;
    ds.utc_offset_hours = opts.utc_offset_hours;

    EmbeddingTable table;
    const bool have_table = !paths.embeddings.empty();
    if (have_table) table = load_embeddings_tsv(paths.embeddings, opts.d_text);

    if (!paths.tweets.empty()) {
        auto f = open_or_throw(paths.tweets);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            line = strip_cr(line);
            if (line.empty()) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw ValidationError(paths.tweets + " line " + std::to_string(lineno) + ": " +
                                      e.what());
            }
            TweetEvent ev;
            try {
                ev.user = j.at("user").get<std::string>();
                ev.ts = j.at("ts").get<Timestamp>();
                if (j.contains("vec")) {
                    ev.vec = j.at("vec").get<std::vector<double>>();
                } else if (j.contains("tokens")) {
                    ev.tokens = j.at("tokens").get<std::vector<std::string>>();
                } else {
                    throw ValidationError("missing 'tokens' or 'vec'");
                }
            } catch (const json::exception& e) {
                throw ValidationError(paths.tweets + " line " + std::to_string(lineno) + ": " +
                                      e.what());
            } catch (const ValidationError& e) {
                throw ValidationError(paths.tweets + " line " + std::to_string(lineno) + ": " +
                                      e.what());
            }
            if (ev.ts <= 0)
                throw ValidationError(paths.tweets + " line " + std::to_string(lineno) +
                                      ": ts must be strictly positive");
            if (!ev.vec.empty() && ev.vec.size() != static_cast<std::size_t>(opts.d_text))
                throw ValidationError(paths.tweets + " line " + std::to_string(lineno) +
                                      ": vec dimension " + std::to_string(ev.vec.size()) +
                                      " != configured " + std::to_string(opts.d_text));
            if (ev.vec.empty() && have_table)
                ev.vec = tweet_vector(ev.tokens, table, &result.report.skipped_tokens);
            ds.tweets.push_back(std::move(ev));
        }
        result.report.tweets = ds.tweets.size();
    }

    if (!paths.retweets.empty()) {
        auto f = open_or_throw(paths.retweets);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            line = strip_cr(line);
            if (line.empty()) continue;
            if (lineno == 1) {
                if (line.rfind("ts,src,dst", 0) != 0)
                    throw ValidationError(paths.retweets + " line 1: expected header 'ts,src,dst'");
                continue;
            }
            const auto parts = split(line, ',');
            if (parts.size() != 3)
                throw ValidationError(paths.retweets + " line " + std::to_string(lineno) +
                                      ": expected ts,src,dst");
            RetweetEvent ev;
            char* end = nullptr;
            ev.ts = std::strtoll(parts[0].c_str(), &end, 10);
            if (end == parts[0].c_str())
                throw ValidationError(paths.retweets + " line " + std::to_string(lineno) +
                                      ": bad timestamp");
            ev.src = parts[1];
            ev.dst = parts[2];
            if (ev.src == ev.dst)
                throw ValidationError(paths.retweets + " line " + std::to_string(lineno) +
                                      ": src equals dst ('" + ev.src + "')");
            ds.retweets.push_back(std::move(ev));
        }
        result.report.retweets = ds.retweets.size();
    }

    if (!paths.labels.empty()) ds.labels = parse_labels(paths.labels);
    if (!paths.test_labels.empty()) ds.test_labels = parse_labels(paths.test_labels);
    if (!paths.seeds.empty()) ds.seeds = parse_labels(paths.seeds);

    // Flag users none of whose tweets resolved to a nonzero vector.
    if (have_table) {
        std::map<std::string, bool> any_nonzero;
        for (const auto& t : ds.tweets) {
            bool nz = false;
            for (double x : t.vec) nz = nz || x != 0.0;
            auto [it, inserted] = any_nonzero.try_emplace(t.user, nz);
            if (!inserted) it->second = it->second || nz;
        }
        for (const auto& [user, nz] : any_nonzero)
            if (!nz) result.report.users_without_vectors.push_back(user);
    }

    std::stable_sort(ds.tweets.begin(), ds.tweets.end(),
                     [](const TweetEvent& a, const TweetEvent& b) { return a.ts < b.ts; });
    std::stable_sort(ds.retweets.begin(), ds.retweets.end(),
                     [](const RetweetEvent& a, const RetweetEvent& b) { return a.ts < b.ts; });
    validate_dataset(ds);
    return result;
}

void write_tweets_jsonl(const std::string& path, const std::vector<TweetEvent>& tweets) {
    std::string out;
    for (const auto& t : tweets) {
        json j;
        j["user"] = t.user;
        j["ts"] = t.ts;
        if (!t.tokens.empty())
            j["tokens"] = t.tokens;
        else
            j["vec"] = t.vec;
        out += j.dump();
        out += '\n';
    }
    atomic_write_text(path, out);
}

void write_retweets_csv(const std::string& path, const std::vector<RetweetEvent>& retweets) {
    std::string out = "ts,src,dst\n";
    for (const auto& r : retweets) {
        out += std::to_string(r.ts);
        out += ',';
        out += r.src;
        out += ',';
        out += r.dst;
        out += '\n';
    }
    atomic_write_text(path, out);
}

void write_labels_csv(const std::string& path, const LabelMap& labels) {
    std::string out = "id,label\n";
    for (const auto& [id, stance] : labels) {
        out += id;
        out += ',';
        out += to_string(stance);
        out += '\n';
    }
    atomic_write_text(path, out);
}

void write_scored_labels_csv(const std::string& path,
                             const std::vector<std::pair<std::string, Stance>>& labels,
                             const std::vector<double>& scores) {
    if (labels.size() != scores.size())
        throw ValidationError("write_scored_labels_csv: size mismatch");
    std::string out = "id,label,score\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out += labels[i].first;
        out += ',';
        out += to_string(labels[i].second);
        out += ',';
        out += format_double(scores[i]);
        out += '\n';
    }
    atomic_write_text(path, out);
}

void write_embeddings_tsv(const std::string& path, const EmbeddingTable& table) {
    std::string out;
    for (const auto& [token, vec] : table.entries) {
        out += token;
        for (double v : vec) {
            out += '\t';
            out += format_double(v);
        }
        out += '\n';
    }
    atomic_write_text(path, out);
}

void atomic_write_text(const std::string& path, const std::string& content) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) throw std::runtime_error("short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace tmkl
