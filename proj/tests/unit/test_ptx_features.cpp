#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "dso/error.hpp"
#include "dso/ptx_features.hpp"
#include "dso/rng.hpp"

using namespace dso;

namespace {

std::string fixture(const std::string& name) {
    std::ifstream in(std::string(DSO_FIXTURE_DIR) + "/" + name);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string wrap_kernel(const std::string& body) {
    return ".version 7.0\n.target sm_70\n.visible .entry k()\n{\n" + body + "\n}\n";
}

std::uint64_t at(const std::map<std::string, std::uint64_t>& m, const std::string& key) {
    auto it = m.find(key);
    return it == m.end() ? 0 : it->second;
}

} // namespace

TEST_CASE("two-instruction body counts by hand") {
    auto kernels = parse_ptx(wrap_kernel("add.s32 %r1,%r2,%r3; bra L1;"));
    REQUIRE(kernels.size() == 1);
    const auto& k = kernels[0];
    CHECK(at(k.instr_counts, "add") == 1);
    CHECK(at(k.instr_counts, "bra") == 1);
    CHECK(k.total_instructions == 2);
    CHECK(at(k.dtype_counts, ".s32") == 1);
    CHECK(k.memspace_counts.empty());
}

TEST_CASE("empty kernel body yields zero counts") {
    auto kernels = parse_ptx(wrap_kernel(""));
    REQUIRE(kernels.size() == 1);
    CHECK(kernels[0].total_instructions == 0);
    CHECK(kernels[0].instr_counts.empty());
}

TEST_CASE("memory-space and data-type tallies") {
    auto kernels = parse_ptx(wrap_kernel(
        "ld.shared.f64 %fd1, [a];\nld.shared.f64 %fd2, [b];\nst.global.f64 [c], %fd1;"));
    REQUIRE(kernels.size() == 1);
    const auto& k = kernels[0];
    CHECK(at(k.memspace_counts, ".shared") == 2);
    CHECK(at(k.memspace_counts, ".global") == 1);
    CHECK(at(k.dtype_counts, ".f64") == 3);
}

TEST_CASE("featurize normalizes per category") {
    auto kernels = parse_ptx(wrap_kernel("add.s32 %r1,%r2,%r3; bra L1;"));
    PtxFeatureVector v = featurize(kernels[0]);

    auto slot_of = [](std::span<const std::string_view> cats, std::string_view name) {
        for (std::size_t i = 0; i < cats.size(); ++i)
            if (cats[i] == name) return static_cast<Eigen::Index>(i);
        return Eigen::Index{-1};
    };
    CHECK(v.instr[slot_of(instruction_categories(), "add")] == doctest::Approx(0.5));
    CHECK(v.instr[slot_of(instruction_categories(), "bra")] == doctest::Approx(0.5));
    CHECK(v.instr.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.dtype[slot_of(data_type_categories(), ".s32")] == doctest::Approx(1.0));
    CHECK(v.memspace.sum() == 0.0);

    // Mixed data types split 3/4 to 1/4.
    KernelInstructionCounts counts;
    counts.dtype_counts[".f32"] = 3;
    counts.dtype_counts[".s32"] = 1;
    PtxFeatureVector mixed = featurize(counts);
    CHECK(mixed.dtype[slot_of(data_type_categories(), ".f32")] == doctest::Approx(0.75));
    CHECK(mixed.dtype[slot_of(data_type_categories(), ".s32")] == doctest::Approx(0.25));

    // All-zero counts stay all-zero.
    PtxFeatureVector zero = featurize(KernelInstructionCounts{});
    CHECK(zero.instr.sum() == 0.0);
    CHECK(zero.dtype.sum() == 0.0);
    CHECK(zero.memspace.sum() == 0.0);
}

TEST_CASE("category lists have the documented shape") {
    CHECK(instruction_categories().size() == 101);
    CHECK(data_type_categories().size() == 17);
    CHECK(memory_space_categories().size() == 8);
    CHECK(instruction_categories().back() == "other");
    CHECK(data_type_categories().back() == "other");
    CHECK(memory_space_categories().back() == "other");
}

TEST_CASE("saxpy_basic fixture matches hand tally") {
    auto kernels = parse_ptx(fixture("saxpy_basic.ptx"));
    REQUIRE(kernels.size() == 1);
    const auto& k = kernels[0];
    CHECK(k.kernel_name == "saxpy_basic");
    CHECK(at(k.instr_counts, "ld") == 2);
    CHECK(at(k.instr_counts, "cvta") == 1);
    CHECK(at(k.instr_counts, "fma") == 1);
    CHECK(at(k.instr_counts, "st") == 1);
    CHECK(at(k.instr_counts, "ret") == 1);
    CHECK(k.total_instructions == 6);
    CHECK(at(k.dtype_counts, ".u64") == 2);
    CHECK(at(k.dtype_counts, ".f32") == 3);
    CHECK(at(k.memspace_counts, ".param") == 1);
    CHECK(at(k.memspace_counts, ".global") == 3);
}

TEST_CASE("predicated fixture: guards and labels do not count") {
    auto kernels = parse_ptx(fixture("predicated.ptx"));
    REQUIRE(kernels.size() == 1);
    const auto& k = kernels[0];
    CHECK(at(k.instr_counts, "ld") == 2);
    CHECK(at(k.instr_counts, "setp") == 1);
    CHECK(at(k.instr_counts, "bra") == 2);
    CHECK(at(k.instr_counts, "st") == 2);
    CHECK(at(k.instr_counts, "mov") == 1);
    CHECK(at(k.instr_counts, "ret") == 1);
    CHECK(k.total_instructions == 9);
    CHECK(at(k.dtype_counts, ".u64") == 1);
    CHECK(at(k.dtype_counts, ".f32") == 5);
    CHECK(at(k.memspace_counts, ".param") == 1);
    CHECK(at(k.memspace_counts, ".global") == 3);
}

TEST_CASE("vector_memory fixture: vector suffixes are transparent") {
    auto kernels = parse_ptx(fixture("vector_memory.ptx"));
    REQUIRE(kernels.size() == 1);
    const auto& k = kernels[0];
    CHECK(at(k.instr_counts, "ld") == 6);
    CHECK(at(k.instr_counts, "st") == 3);
    CHECK(at(k.instr_counts, "bar") == 1);
    CHECK(at(k.instr_counts, "ret") == 1);
    CHECK(k.total_instructions == 11);
    CHECK(at(k.dtype_counts, ".u64") == 2);
    CHECK(at(k.dtype_counts, ".f32") == 4);
    CHECK(at(k.dtype_counts, ".f64") == 3);
    CHECK(at(k.memspace_counts, ".param") == 2);
    CHECK(at(k.memspace_counts, ".global") == 3);
    CHECK(at(k.memspace_counts, ".shared") == 4);
}

TEST_CASE("multi_kernel fixture: kernels in source order, helpers ignored") {
    auto kernels = parse_ptx(fixture("multi_kernel.ptx"));
    REQUIRE(kernels.size() == 3);
    CHECK(kernels[0].kernel_name == "alpha");
    CHECK(kernels[1].kernel_name == "beta");
    CHECK(kernels[2].kernel_name == "gamma_decl");

    const auto& a = kernels[0];
    CHECK(at(a.instr_counts, "add") == 1);
    CHECK(at(a.instr_counts, "cvt") == 1);
    CHECK(at(a.instr_counts, "atom") == 1);
    CHECK(at(a.instr_counts, "exit") == 1);
    CHECK(a.total_instructions == 4);
    CHECK(at(a.dtype_counts, ".s32") == 2); // add.s32 and cvt....s32
    CHECK(at(a.dtype_counts, ".f32") == 2); // cvt.f32 and atom...f32
    CHECK(at(a.memspace_counts, ".global") == 1);

    CHECK(kernels[1].total_instructions == 0);
    CHECK(kernels[2].total_instructions == 0);
}

TEST_CASE("exotic_ops fixture: unknown roots and other buckets") {
    auto kernels = parse_ptx(fixture("exotic_ops.ptx"));
    REQUIRE(kernels.size() == 1);
    const auto& k = kernels[0];
    CHECK(at(k.instr_counts, "ld") == 2);
    CHECK(at(k.instr_counts, "other") == 3); // frobnicate, quantize4, wgmma
    CHECK(at(k.instr_counts, "cvt") == 1);
    CHECK(at(k.instr_counts, "mbarrier") == 1);
    CHECK(at(k.instr_counts, "ret") == 1);
    CHECK(k.total_instructions == 8);
    CHECK(at(k.dtype_counts, ".u64") == 1);
    CHECK(at(k.dtype_counts, ".f32") == 2);
    CHECK(at(k.dtype_counts, "other") == 1); // .bf16
    CHECK(at(k.dtype_counts, ".u32") == 1);
    CHECK(at(k.dtype_counts, ".b64") == 1);
    CHECK(at(k.memspace_counts, ".param") == 1);
    CHECK(at(k.memspace_counts, "other") == 1); // .tex
}

TEST_CASE("malformed input is rejected with a line number") {
    CHECK_THROWS_WITH_AS(
        (void)parse_ptx(".entry broken\n{\n  add.s32 %r1,%r2,%r3;\n"), // no closing brace
        doctest::Contains("line 2"), Error);
    CHECK_THROWS_AS((void)parse_ptx("/* never closed"), Error);
    try {
        (void)parse_ptx(".entry broken\n{\n  add.s32 %r1,%r2,%r3;\n");
        FAIL("expected MalformedPtx");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MalformedPtx);
    }
}

TEST_CASE("kernel count equals .entry count on generated inputs") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = static_cast<int>(rng.below(6));
        std::string src = ".version 7.0\n";
        for (int i = 0; i < n; ++i) {
            src += ".visible .entry k" + std::to_string(i) + "()\n{\n";
            const int instructions = static_cast<int>(rng.below(5));
            for (int j = 0; j < instructions; ++j) src += "  add.s32 %r1,%r2,%r3;\n";
            src += "}\n";
        }
        CHECK(parse_ptx(src).size() == static_cast<std::size_t>(n));
    }
}

TEST_CASE("round trip: features times category total reproduce counts") {
    Rng rng(29);
    for (int trial = 0; trial < 20; ++trial) {
        std::string body;
        const int n = 1 + static_cast<int>(rng.below(30));
        const char* pool[] = {"add.s32 %r1,%r2,%r3;", "ld.global.f32 %f1,[%rd1];",
                              "st.shared.f64 [%rd1],%fd1;", "fma.rn.f32 %f1,%f2,%f3,%f4;",
                              "bogusop.u16 %r1;", "bra L0;"};
        for (int i = 0; i < n; ++i) body += std::string(pool[rng.below(6)]) + "\n";
        auto kernels = parse_ptx(wrap_kernel(body));
        REQUIRE(kernels.size() == 1);
        const auto& k = kernels[0];
        PtxFeatureVector v = featurize(k);

        // Category sums are exactly 0 or 1.
        for (double s : {v.instr.sum(), v.dtype.sum(), v.memspace.sum()})
            CHECK((std::abs(s) <= 1e-12 || std::abs(s - 1.0) <= 1e-12));

        // Reconstruct raw counts for every canonical key.
        auto check_block = [](const Eigen::VectorXd& vec,
                              std::span<const std::string_view> cats,
                              const std::map<std::string, std::uint64_t>& tally) {
            double total = 0.0;
            for (const auto& [key, c] : tally) total += static_cast<double>(c);
            for (std::size_t i = 0; i < cats.size(); ++i) {
                auto it = tally.find(std::string(cats[i]));
                const double expect = it == tally.end() ? 0.0 : static_cast<double>(it->second);
                CHECK(vec[static_cast<Eigen::Index>(i)] * total ==
                      doctest::Approx(expect).epsilon(1e-9));
            }
        };
        check_block(v.instr, instruction_categories(), k.instr_counts);
        check_block(v.dtype, data_type_categories(), k.dtype_counts);
        check_block(v.memspace, memory_space_categories(), k.memspace_counts);
    }
}
