#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace dso {

// Canonical feature categories. The PTX ISA defines the members; the final
// slot of every list is an explicit "other" bucket so the parser is total:
// anything unlisted counts there instead of failing.
//
//   instruction opcode roots : 101 slots (100 roots + other)
//   data-type suffixes       :  17 slots (16 types + other)
//   memory-space suffixes    :   8 slots (7 state spaces + other)
inline constexpr std::size_t kInstructionSlots = 101;
inline constexpr std::size_t kDataTypeSlots = 17;
inline constexpr std::size_t kMemorySpaceSlots = 8;

std::span<const std::string_view> instruction_categories(); // size 101
std::span<const std::string_view> data_type_categories();   // size 17
std::span<const std::string_view> memory_space_categories(); // size 8

// Raw per-kernel tallies keyed by canonical category name ("other" absorbs
// anything unlisted).
struct KernelInstructionCounts {
    std::string kernel_name;
    std::map<std::string, std::uint64_t> instr_counts;
    std::map<std::string, std::uint64_t> dtype_counts;
    std::map<std::string, std::uint64_t> memspace_counts;
    std::uint64_t total_instructions = 0;
};

// Category-normalized static feature vector. Every entry lies in [0, 1];
// each block sums to 1 when its raw total is positive and is all-zero
// otherwise. Ordering follows the canonical lists above.
struct PtxFeatureVector {
    Eigen::VectorXd instr;    // 101
    Eigen::VectorXd dtype;    // 17
    Eigen::VectorXd memspace; // 8
};

// Parse PTX assembly text into per-kernel instruction tallies, in source
// order. Comments, directives, labels and predicate guards do not count.
// Throws Error(MalformedPtx) with a line number on unbalanced braces or
// block comments.
std::vector<KernelInstructionCounts> parse_ptx(std::string_view source_text);

// Normalize raw counts by their category totals.
PtxFeatureVector featurize(const KernelInstructionCounts& counts);

} // namespace dso
