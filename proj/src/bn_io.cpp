#include "rbn/bn_io.hpp"

#include <zlib.h>

#include <fstream>
#include <sstream>

#include "rbn/errors.hpp"

namespace rbn {

namespace fs = std::filesystem;

nlohmann::json net_to_json(const BayesNet& net) {
    nlohmann::json doc;
    doc["d"] = net.nodes();
    doc["parents"] = net.structure().all_parents();
    doc["cpt"] = std::vector<double>(net.cpt().begin(), net.cpt().end());
    return doc;
}

BayesNet net_from_json(const nlohmann::json& doc) {
    try {
        const auto d = doc.at("d").get<std::size_t>();
        auto parents = doc.at("parents").get<std::vector<std::vector<std::size_t>>>();
        auto cpt = doc.at("cpt").get<std::vector<double>>();
        if (parents.size() != d) {
            throw ShapeError("net.json: parents has " + std::to_string(parents.size()) + " entries but d = " +
                             std::to_string(d));
        }
        return BayesNet(BayesNetStructure(std::move(parents)), std::move(cpt));
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("net.json: ") + e.what());
    }
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << text;
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
    write_text(path, doc.dump(2) + "\n");
}

BayesNet read_net(const fs::path& path) {
    return net_from_json(read_json(path));
}

void write_net(const fs::path& path, const BayesNet& net, const nlohmann::json& meta) {
    auto doc = net_to_json(net);
    if (!meta.is_null()) {
        doc["meta"] = meta;
    }
    write_json(path, doc);
}

namespace {

bool is_gzip(const fs::path& path) {
    return path.extension() == ".gz";
}

std::string slurp(const fs::path& path) {
    if (is_gzip(path)) {
        gzFile f = gzopen(path.c_str(), "rb");
        if (!f) {
            throw IoError("cannot open " + path.string());
        }
        std::string out;
        char buf[1 << 16];
        int got;
        while ((got = gzread(f, buf, sizeof(buf))) > 0) {
            out.append(buf, static_cast<std::size_t>(got));
        }
        const bool failed = got < 0;
        gzclose(f);
        if (failed) {
            throw IoError("corrupt gzip stream in " + path.string());
        }
        return out;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const fs::path& path, const std::string& data) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    if (is_gzip(path)) {
        // Fixed header fields (no name, no mtime) keep the output byte-stable.
        gzFile f = gzopen(path.c_str(), "wb6");
        if (!f) {
            throw IoError("cannot write " + path.string());
        }
        const bool ok = data.empty() || gzwrite(f, data.data(), static_cast<unsigned>(data.size())) > 0;
        gzclose(f);
        if (!ok) {
            throw IoError("gzip write failed for " + path.string());
        }
        return;
    }
    write_text(path, data);
}

} // namespace

SampleSet read_samples(const fs::path& path, const BayesNetStructure& structure) {
    const std::string data = slurp(path);
    std::size_t pos = data.find('\n');
    if (pos == std::string::npos) {
        throw IoError(path.string() + ": missing header line");
    }
    std::istringstream header(data.substr(0, pos));
    std::size_t n = 0, d = 0;
    if (!(header >> n >> d)) {
        throw IoError(path.string() + ": header must be 'N d'");
    }
    if (d != structure.nodes()) {
        throw ShapeError(path.string() + ": samples have d = " + std::to_string(d) + " but structure has " +
                         std::to_string(structure.nodes()) + " nodes");
    }
    std::vector<std::uint8_t> bits(n * d);
    ++pos;
    for (std::size_t i = 0; i < n; ++i) {
        if (pos + d > data.size() || (pos + d < data.size() && data[pos + d] != '\n')) {
            throw IoError(path.string() + ": row " + std::to_string(i) + " is malformed");
        }
        for (std::size_t j = 0; j < d; ++j) {
            const char c = data[pos + j];
            if (c != '0' && c != '1') {
                throw IoError(path.string() + ": row " + std::to_string(i) + " has a character other than 0/1");
            }
            bits[i * d + j] = static_cast<std::uint8_t>(c - '0');
        }
        pos += d + 1;
    }
    return SampleSet(structure, n, std::move(bits));
}

void write_samples(const fs::path& path, const SampleSet& samples) {
    const std::size_t n = samples.size();
    const std::size_t d = samples.dim();
    std::string out = std::to_string(n) + " " + std::to_string(d) + "\n";
    out.reserve(out.size() + n * (d + 1));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::uint8_t b : samples.row(i)) {
            out.push_back(static_cast<char>('0' + b));
        }
        out.push_back('\n');
    }
    spill(path, out);
}

std::vector<bool> read_mask(const fs::path& path) {
    const std::string data = slurp(path);
    std::vector<bool> planted;
    for (char c : data) {
        if (c == '\n') {
            break;
        }
        if (c != 'g' && c != 'b') {
            throw IoError(path.string() + ": mask characters must be 'g' or 'b'");
        }
        planted.push_back(c == 'b');
    }
    return planted;
}

void write_mask(const fs::path& path, const std::vector<bool>& planted) {
    std::string out;
    out.reserve(planted.size() + 1);
    for (bool b : planted) {
        out.push_back(b ? 'b' : 'g');
    }
    out.push_back('\n');
    write_text(path, out);
}

} // namespace rbn
