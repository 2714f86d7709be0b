#pragma once

// Subcontract signature database and a-priori knowledge base.
//
// subcontracts.tsv, one tab-separated record per line:
//   subcontract  version  method  selector(0x%08x or -)  intra_sig  chain_sig  visibility(public|internal)
// Signatures are space-separated symbols; an empty signature is written as -.
//
// knowledge.tsv, whitespace-separated fields (canonical form uses tabs):
//   conflict        A.m  B.n  src=...
//   access-control  A.m  params=1,2  guard=caller-check|value-bound|reentrancy-guard  sensitive=...  src=...
// Lines starting with # are comments.

#include "smvscan/signature.hpp"

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace smvscan {

enum class Visibility { Public, Internal };
std::string_view to_string(Visibility v) noexcept;

struct RecordKey {
    std::string subcontract;
    std::string version;
    std::string method;

    auto operator<=>(const RecordKey&) const = default;
    /// `Subcontract.method@version`
    std::string str() const;
};

struct SubcontractRecord {
    RecordKey key;
    std::optional<std::uint32_t> selector;
    std::string intra_sig;
    std::string chain_sig;
    Visibility visibility = Visibility::Internal;
};

/// Parsed signature of a stored record; throws InvalidSymbol.
MethodSignature signature_of_db_method(const SubcontractRecord& record);

struct Database {
    std::vector<SubcontractRecord> records;
    /// Parsed signatures, parallel to records.
    std::vector<MethodSignature> signatures;

    /// Appends with the uniqueness check; throws DuplicateKey or InvalidSymbol.
    void add(SubcontractRecord r);
    const SubcontractRecord* find(std::string_view subcontract, std::string_view method) const;
};

Database parse_db(std::string_view text);
Database load_db(const std::filesystem::path& path);
std::string format_db(const Database& db);
void save_db(const Database& db, const std::filesystem::path& path);

struct MethodRef {
    std::string subcontract;
    std::string method;

    auto operator<=>(const MethodRef&) const = default;
    std::string str() const { return subcontract + "." + method; }
};

enum class GuardKind { CallerCheck, ValueBound, ReentrancyGuard };
std::string_view to_string(GuardKind g) noexcept;

struct KnowledgeEntry {
    enum class Kind { Conflict, AccessControl };
    Kind kind = Kind::Conflict;
    std::vector<MethodRef> members;  // two for conflicts, one for access control
    std::vector<unsigned> guarded_params;
    GuardKind guard = GuardKind::ValueBound;
    std::string sensitive;
    std::string source;
};

struct KnowledgeBase {
    std::vector<KnowledgeEntry> entries;

    bool conflicting(const MethodRef& a, const MethodRef& b) const;
    const KnowledgeEntry* access_control(const MethodRef& m) const;
    /// Members that resolve to no record of `db`.
    std::vector<std::string> unresolved(const Database& db) const;
};

KnowledgeBase parse_knowledge(std::string_view text);
KnowledgeBase load_knowledge(const std::filesystem::path& path);
std::string format_knowledge(const KnowledgeBase& kb);

struct ManifestRow {
    std::string file;
    RecordKey key;
    /// Exactly one locator: a dispatcher selector or a region start offset.
    std::optional<std::uint32_t> selector;
    std::optional<std::size_t> offset;
    Visibility visibility = Visibility::Internal;
};

/// Manifest lines: `file subcontract version method locator visibility` where
/// locator is `selector:0x....` or `offset:0x..`.
std::vector<ManifestRow> parse_manifest(std::string_view text);

struct BuildResult {
    Database db;
    std::vector<std::string> errors;  // one per failed manifest row
};

/// Runs decode, heuristic boundary recovery and signature extraction over
/// every manifest row; records are sorted by key.
BuildResult build_db(const std::filesystem::path& bytecode_dir, const std::vector<ManifestRow>& manifest,
                     std::size_t max_depth = 5);

}  // namespace smvscan
