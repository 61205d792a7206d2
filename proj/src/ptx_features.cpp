#include "dso/ptx_features.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_set>

#include "dso/error.hpp"

namespace dso {

namespace {

// Opcode roots of the PTX ISA 7.x instruction set (root = token up to the
// first '.'). 100 entries plus the trailing "other" bucket. SIMD-video
// opcodes beyond vadd/vmad are rare in compiler output and fall into
// "other".
constexpr std::array<std::string_view, kInstructionSlots> kInstrCategories = {
    "add",    "addc",   "sub",    "subc",   "mul",     "mad",    "madc",
    "mul24",  "mad24",  "sad",    "div",    "rem",     "abs",    "neg",
    "min",    "max",    "popc",   "clz",    "bfind",   "fns",    "brev",
    "bfe",    "bfi",    "szext",  "bmsk",   "dp4a",    "dp2a",   "testp",
    "copysign", "rcp",  "sqrt",   "rsqrt",  "sin",     "cos",    "lg2",
    "ex2",    "tanh",   "fma",    "set",    "setp",    "selp",   "slct",
    "and",    "or",     "xor",    "not",    "cnot",    "lop3",   "shf",
    "shl",    "shr",    "mov",    "shfl",   "prmt",    "ld",     "ldu",
    "st",     "prefetch", "prefetchu", "isspacep", "cvta", "cvt", "cp",
    "tex",    "tld4",   "txq",    "suld",   "sust",    "sured",  "suq",
    "istypep", "bra",   "brx",    "call",   "ret",     "exit",   "bar",
    "barrier", "membar", "fence", "atom",   "red",     "vote",   "match",
    "activemask", "redux", "griddepcontrol", "elect",  "wmma",   "mma",
    "ldmatrix", "stmatrix", "movmatrix", "mbarrier",   "trap",   "brkpt",
    "nanosleep", "pmevent", "vadd",   "vmad",
    "other",
};

// Fundamental operand types (16) plus "other"; .pred, .bf16, .tf32 and the
// fp8 variants land in "other".
constexpr std::array<std::string_view, kDataTypeSlots> kDtypeCategories = {
    ".s8",  ".s16", ".s32", ".s64", ".u8",  ".u16",   ".u32", ".u64",
    ".f16", ".f16x2", ".f32", ".f64", ".b8", ".b16",  ".b32", ".b64",
    "other",
};

// State spaces (7) plus "other"; the deprecated .tex space lands in "other".
constexpr std::array<std::string_view, kMemorySpaceSlots> kMemspaceCategories = {
    ".reg", ".sreg", ".const", ".global", ".local", ".param", ".shared",
    "other",
};

// Suffixes that are data types or state spaces of the ISA but sit outside
// the canonical lists; they land in their category's "other" bucket.
// Anything else (.rn, .sat, .v4, cache hints, ...) is a modifier and
// counts nowhere.
constexpr std::array<std::string_view, 7> kDtypeOtherSuffixes = {
    ".pred", ".bf16", ".tf32", ".e4m3", ".e5m2", ".b128", ".s16x2",
};
constexpr std::array<std::string_view, 1> kMemspaceOtherSuffixes = {".tex"};

const std::unordered_set<std::string_view>& instr_set() {
    static const std::unordered_set<std::string_view> s(kInstrCategories.begin(),
                                                        kInstrCategories.end() - 1);
    return s;
}
const std::unordered_set<std::string_view>& dtype_set() {
    static const std::unordered_set<std::string_view> s(kDtypeCategories.begin(),
                                                        kDtypeCategories.end() - 1);
    return s;
}
const std::unordered_set<std::string_view>& dtype_other_set() {
    static const std::unordered_set<std::string_view> s(kDtypeOtherSuffixes.begin(),
                                                        kDtypeOtherSuffixes.end());
    return s;
}
const std::unordered_set<std::string_view>& memspace_set() {
    static const std::unordered_set<std::string_view> s(kMemspaceCategories.begin(),
                                                        kMemspaceCategories.end() - 1);
    return s;
}
const std::unordered_set<std::string_view>& memspace_other_set() {
    static const std::unordered_set<std::string_view> s(kMemspaceOtherSuffixes.begin(),
                                                        kMemspaceOtherSuffixes.end());
    return s;
}

struct Cursor {
    std::string_view text;
    std::size_t pos = 0;
    std::size_t line = 1;

    bool done() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }
    char peek_next() const { return pos + 1 < text.size() ? text[pos + 1] : '\0'; }
    void advance() {
        if (text[pos] == '\n') ++line;
        ++pos;
    }
};

// Strip comments and fold whitespace so the tokenizer only ever sees code.
// Newlines are preserved for error line numbers.
std::string strip_comments(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    Cursor c{text};
    while (!c.done()) {
        char ch = c.peek();
        if (ch == '/' && c.peek_next() == '/') {
            while (!c.done() && c.peek() != '\n') c.advance();
        } else if (ch == '/' && c.peek_next() == '*') {
            std::size_t open_line = c.line;
            c.advance();
            c.advance();
            bool closed = false;
            while (!c.done()) {
                if (c.peek() == '*' && c.peek_next() == '/') {
                    c.advance();
                    c.advance();
                    closed = true;
                    break;
                }
                if (c.peek() == '\n') out.push_back('\n');
                c.advance();
            }
            if (!closed)
                throw Error(ErrorKind::MalformedPtx,
                            "unterminated block comment starting at line " +
                                std::to_string(open_line));
        } else {
            out.push_back(ch);
            c.advance();
        }
    }
    return out;
}

bool is_token_char(char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.' ||
           ch == '$' || ch == '%';
}

// One statement of a kernel body, already comment-free and ';'-terminated.
void count_statement(std::string_view stmt, KernelInstructionCounts& k) {
    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < stmt.size() && std::isspace(static_cast<unsigned char>(stmt[i]))) ++i;
    };

    skip_ws();
    // Peel scope braces, directive lines and labels off the front until an
    // instruction token (or nothing) remains. Directives without a
    // terminating ';' (.loc, .pragma lines emitted with debug info) occupy
    // whole lines inside the statement, so they are dropped line-wise.
    for (bool peeled = true; peeled;) {
        peeled = false;
        while (i < stmt.size() && (stmt[i] == '{' || stmt[i] == '}')) {
            ++i;
            skip_ws();
            peeled = true;
        }
        if (i < stmt.size() && stmt[i] == '.') {
            std::size_t nl = stmt.find('\n', i);
            if (nl == std::string_view::npos) return; // ';'-terminated directive
            i = nl + 1;
            skip_ws();
            peeled = true;
        }
        std::size_t j = i;
        while (j < stmt.size() && is_token_char(stmt[j])) ++j;
        if (j < stmt.size() && stmt[j] == ':' && j > i) {
            i = j + 1;
            skip_ws();
            peeled = true;
        }
    }
    // Predicate guard: @%p3 or @!%p3. Guards never create counts.
    if (i < stmt.size() && stmt[i] == '@') {
        ++i;
        if (i < stmt.size() && stmt[i] == '!') ++i;
        while (i < stmt.size() && is_token_char(stmt[i])) ++i;
        skip_ws();
    }
    if (i >= stmt.size()) return;          // label-only statement
    if (stmt[i] == '.') return;            // directive (.reg, .loc, .pragma, ...)
    if (stmt[i] == '{' || stmt[i] == '}') return;
    if (!std::isalpha(static_cast<unsigned char>(stmt[i])) && stmt[i] != '_') return;

    std::size_t start = i;
    while (i < stmt.size() && is_token_char(stmt[i])) ++i;
    std::string_view opcode = stmt.substr(start, i - start);

    // Split the opcode token on '.': root, then modifier suffixes.
    std::size_t dot = opcode.find('.');
    std::string_view root = opcode.substr(0, dot);
    std::string root_key = instr_set().contains(root) ? std::string(root) : "other";
    k.instr_counts[root_key] += 1;
    k.total_instructions += 1;

    while (dot != std::string_view::npos) {
        std::size_t next = opcode.find('.', dot + 1);
        std::string_view suffix = opcode.substr(dot, next == std::string_view::npos
                                                         ? std::string_view::npos
                                                         : next - dot);
        if (dtype_set().contains(suffix)) {
            k.dtype_counts[std::string(suffix)] += 1;
        } else if (memspace_set().contains(suffix)) {
            k.memspace_counts[std::string(suffix)] += 1;
        } else if (dtype_other_set().contains(suffix)) {
            k.dtype_counts["other"] += 1;
        } else if (memspace_other_set().contains(suffix)) {
            k.memspace_counts["other"] += 1;
        }
        // Vector widths (.v2/.v4), rounding modes, cache hints and anything
        // else not in the canonical lists are ignored.
        dot = next;
    }
}

std::string_view trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

} // namespace

std::span<const std::string_view> instruction_categories() {
    return {kInstrCategories.data(), kInstrCategories.size()};
}
std::span<const std::string_view> data_type_categories() {
    return {kDtypeCategories.data(), kDtypeCategories.size()};
}
std::span<const std::string_view> memory_space_categories() {
    return {kMemspaceCategories.data(), kMemspaceCategories.size()};
}

std::vector<KernelInstructionCounts> parse_ptx(std::string_view source_text) {
    std::string code = strip_comments(source_text);
    std::vector<KernelInstructionCounts> kernels;

    Cursor c{code};
    while (!c.done()) {
        // Find the next ".entry" directive.
        std::size_t at = code.find(".entry", c.pos);
        if (at == std::string_view::npos) break;
        // Token boundary check: ".entry" must not be a fragment of a longer
        // token such as "foo.entryish".
        std::size_t after = at + 6;
        bool boundary_ok = (after >= code.size() || !is_token_char(code[after])) &&
                           (at == 0 || !is_token_char(code[at - 1]));
        while (c.pos < at) c.advance();
        if (!boundary_ok) {
            c.advance();
            continue;
        }
        for (int i = 0; i < 6 && !c.done(); ++i) c.advance();

        KernelInstructionCounts kernel;

        // Kernel name: next identifier token.
        while (!c.done() && std::isspace(static_cast<unsigned char>(c.peek()))) c.advance();
        {
            std::size_t name_start = c.pos;
            while (!c.done() && is_token_char(c.peek())) c.advance();
            kernel.kernel_name = std::string(code.substr(name_start, c.pos - name_start));
        }

        // Scan forward to either the body '{' or a declaration-ending ';'.
        // Parameter lists may contain parentheses and brackets but no braces.
        while (!c.done() && c.peek() != '{' && c.peek() != ';') c.advance();
        if (c.done() || c.peek() == ';') {
            // Declaration without a body: a kernel with zero counts.
            if (!c.done()) c.advance();
            kernels.push_back(std::move(kernel));
            continue;
        }

        // Body: consume balanced braces, splitting on ';' at any depth.
        // Braces are only depth markers here; vector operands like
        // {%f1,%f2} stay inside their statement and count_statement peels
        // any scope braces that end up at a statement's front.
        std::size_t body_line = c.line;
        int depth = 0;
        std::size_t stmt_start = c.pos + 1;
        do {
            char ch = c.peek();
            if (ch == '{') {
                ++depth;
            } else if (ch == '}') {
                --depth;
                if (depth < 0)
                    throw Error(ErrorKind::MalformedPtx,
                                "unbalanced '}' at line " + std::to_string(c.line));
            } else if (ch == ';') {
                count_statement(trim(code.substr(stmt_start, c.pos - stmt_start)), kernel);
                stmt_start = c.pos + 1;
            }
            c.advance();
        } while (!c.done() && depth > 0);
        if (depth != 0)
            throw Error(ErrorKind::MalformedPtx,
                        "unterminated kernel body opened at line " +
                            std::to_string(body_line));

        kernels.push_back(std::move(kernel));
    }
    return kernels;
}

PtxFeatureVector featurize(const KernelInstructionCounts& counts) {
    auto normalize = [](std::span<const std::string_view> categories,
                        const std::map<std::string, std::uint64_t>& tally) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(categories.size()));
        double total = 0.0;
        for (const auto& [key, n] : tally) total += static_cast<double>(n);
        if (total == 0.0) return v;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            auto it = tally.find(std::string(categories[static_cast<std::size_t>(i)]));
            if (it != tally.end()) v[i] = static_cast<double>(it->second) / total;
        }
        return v;
    };
    return PtxFeatureVector{
        normalize(instruction_categories(), counts.instr_counts),
        normalize(data_type_categories(), counts.dtype_counts),
        normalize(memory_space_categories(), counts.memspace_counts),
    };
}

} // namespace dso
