#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "rbn/bn_io.hpp"
#include "rbn/errors.hpp"

using namespace rbn;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const char* name) {
    fs::path p = fs::temp_directory_path() / ("rbn_io_" + std::string(name));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

TEST_CASE("net json round trip and validation") {
    const BayesNet net(BayesNetStructure::chain(3), {0.5, 0.2, 0.8, 0.1, 0.9});
    const auto j = net_to_json(net);
    CHECK(j.at("d") == 3);
    const BayesNet back = net_from_json(j);
    CHECK(back.structure() == net.structure());
    CHECK(std::vector<double>(back.cpt().begin(), back.cpt().end()) ==
          std::vector<double>(net.cpt().begin(), net.cpt().end()));

    auto bad = j;
    bad["cpt"].erase(0);
    CHECK_THROWS_AS(net_from_json(bad), ShapeError);
    auto cyclic = j;
    cyclic["parents"][0] = {1};
    CHECK_THROWS_AS(net_from_json(cyclic), StructureError);
    CHECK_THROWS_AS(net_from_json(nlohmann::json{{"d", 1}}), IoError);
}

TEST_CASE("samples text and gzip round trip") {
    const auto dir = scratch_dir("samples");
    const BayesNetStructure st = BayesNetStructure::chain(3);
    const SampleSet s(st, 4, {0, 0, 1, 1, 1, 1, 0, 1, 0, 1, 0, 0});
    write_samples(dir / "s.txt", s);
    CHECK(slurp(dir / "s.txt") == "4 3\n001\n111\n010\n100\n");
    CHECK(read_samples(dir / "s.txt", st) == s);
    write_samples(dir / "s.txt.gz", s);
    CHECK(read_samples(dir / "s.txt.gz", st) == s);
    write_samples(dir / "again.txt.gz", s);
    CHECK(slurp(dir / "s.txt.gz") == slurp(dir / "again.txt.gz"));

    CHECK_THROWS_AS(read_samples(dir / "missing.txt", st), IoError);
    CHECK_THROWS_AS(read_samples(dir / "s.txt", BayesNetStructure::empty(2)), ShapeError);
    std::ofstream(dir / "bad.txt") << "2 3\n001\n0x1\n";
    CHECK_THROWS_AS(read_samples(dir / "bad.txt", st), IoError);
}

TEST_CASE("mask sidecar") {
    const auto dir = scratch_dir("mask");
    const std::vector<bool> m{false, true, false, false, true};
    write_mask(dir / "mask.txt", m);
    CHECK(slurp(dir / "mask.txt") == "gbggb\n");
    CHECK(read_mask(dir / "mask.txt") == m);
}
