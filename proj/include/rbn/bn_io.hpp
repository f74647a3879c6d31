#ifndef RBN_BN_IO_HPP
#define RBN_BN_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "rbn/bn.hpp"

namespace rbn {

/* net.json: {"d": int, "parents": [[int, ...], ...], "cpt": [float, ...]}
 * with cpt in flat lexicographic order. Extra keys (e.g. "meta") are
 * ignored on read. */
nlohmann::json net_to_json(const BayesNet& net);
BayesNet net_from_json(const nlohmann::json& doc);

BayesNet read_net(const std::filesystem::path& path);
void write_net(const std::filesystem::path& path, const BayesNet& net, const nlohmann::json& meta = nullptr);

/* Samples file: "N d" on the first line, then N lines of d characters in
 * {0,1}. A ".gz" extension selects gzip. */
SampleSet read_samples(const std::filesystem::path& path, const BayesNetStructure& structure);
void write_samples(const std::filesystem::path& path, const SampleSet& samples);

// Mask sidecar: a single line of N characters, 'g' for good rows, 'b' for planted rows.
std::vector<bool> read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const std::vector<bool>& planted);

nlohmann::json read_json(const std::filesystem::path& path);
// Pretty-printed with a trailing newline; byte-stable for equal documents.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace rbn

#endif
