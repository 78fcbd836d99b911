#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "medflow/dtype.hpp"
#include "medflow/errors.hpp"

namespace medflow {

MEDFLOW_DEFINE_ERROR(CorruptManifestError, "CorruptManifest");
MEDFLOW_DEFINE_ERROR(LockHeldError, "LockHeld");
MEDFLOW_DEFINE_ERROR(NotFoundError, "NotFound");
MEDFLOW_DEFINE_ERROR(NameGrammarError, "NameGrammarViolation");
MEDFLOW_DEFINE_ERROR(SizeMismatchError, "SizeMismatch");
MEDFLOW_DEFINE_ERROR(SelectorOutOfBoundsError, "SelectorOutOfBounds");
MEDFLOW_DEFINE_ERROR(ReadOnlyStoreError, "ReadOnlyStore");
MEDFLOW_DEFINE_ERROR(BadAttrError, "BadAttr");

// Role a dataset plays in a workflow, inferred from its semantic name plus
// rank. Pure and total; conflicting name/rank combinations map to Unknown.
enum class DatasetRole { Mask2D, Volume3D, Mask3D, Series4D, Table, Scalar, Unknown };

DatasetRole infer_role(const std::string& name, std::size_t rank);
std::string role_name(DatasetRole role);

enum class JournalOp { Write, Overwrite, Annotate };
std::string journal_op_name(JournalOp op);

struct JournalEntry {
  std::uint64_t seq = 0;
  std::string timestamp;  // ISO-8601 UTC
  std::string actor;
  JournalOp op = JournalOp::Write;
  std::string dataset;
  std::uint64_t content_hash = 0;
};

struct Annotation {
  std::string dataset;
  std::vector<std::uint64_t> selector;  // one index per dimension
  std::string label;
  std::string actor;
  std::string timestamp;  // filled on persist when empty
};

struct DatasetInfo {
  std::string name;
  DType dtype = DType::U8;
  std::vector<std::uint64_t> shape;
  std::map<std::string, std::string> attrs;
  std::uint64_t content_hash = 0;
  DatasetRole role = DatasetRole::Unknown;
  std::uint64_t payload_bytes = 0;
};

struct DatasetRecord {
  std::string name;
  DType dtype = DType::U8;
  std::vector<std::uint64_t> shape;
  std::map<std::string, std::string> attrs;
  std::vector<std::uint8_t> payload;  // row-major little-endian
};

struct GcStats {
  std::size_t files_removed = 0;
  std::uint64_t bytes_freed = 0;
};

// Editable persistent dataset store: the shared blackboard between task
// nodes. On disk it is a directory of content-addressed payload blobs plus
// three append-only TSV files:
//   manifest.tsv    name, dtype, rank, dims, payload file, attr pairs
//                   (append-only; the last record for a name is current)
//   journal.log     seq, timestamp, actor, op, dataset, payload hash
//   annotations.tsv dataset, selector, label, actor, timestamp
// Writes commit payload-first (write temp, rename) so a crash can truncate
// at most the trailing manifest line. One writer per store, enforced with an
// advisory flock on `lock`; reads take no lock.
class Store {
 public:
  enum class Mode { ReadWrite, ReadOnly };

  static Store open(const std::filesystem::path& dir, Mode mode = Mode::ReadWrite);

  Store(Store&&) noexcept;
  Store& operator=(Store&&) noexcept;
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;
  ~Store();

  const std::filesystem::path& root() const;
  Mode mode() const;

  JournalEntry write_dataset(const std::string& name, DType dtype,
                             std::span<const std::uint64_t> shape,
                             std::span<const std::uint8_t> payload,
                             const std::map<std::string, std::string>& attrs = {},
                             const std::string& actor = "system");

  // Streaming variant for payloads larger than any single buffer. `next`
  // fills the caller-visible chunk and returns its size; zero ends the
  // stream. Total streamed bytes must match the shape.
  JournalEntry write_dataset_stream(
      const std::string& name, DType dtype, std::span<const std::uint64_t> shape,
      const std::function<std::size_t(std::span<std::uint8_t>)>& next,
      const std::map<std::string, std::string>& attrs = {},
      const std::string& actor = "system");

  DatasetRecord read_dataset(const std::string& name) const;

  // Streams the payload through `sink` in bounded chunks without ever
  // materializing the whole buffer.
  void read_payload_chunks(const std::string& name,
                           const std::function<void(std::span<const std::uint8_t>)>& sink,
                           std::size_t chunk_bytes = 1 << 16) const;

  bool contains(const std::string& name) const;
  DatasetInfo stat_dataset(const std::string& name) const;
  std::vector<DatasetInfo> list_datasets(const std::string& pattern = "*") const;
  std::vector<std::string> dataset_names() const;

  JournalEntry annotate(const Annotation& annotation);
  std::vector<Annotation> annotations(const std::string& dataset) const;
  std::size_t annotation_count() const;

  std::vector<JournalEntry> history(const std::string& name) const;
  std::vector<JournalEntry> journal() const;
  std::uint64_t journal_seq() const;

  // name -> payload hash hex of every current dataset.
  std::map<std::string, std::string> digests() const;

  // Rebuilds the dataset set from the journal alone and checks it against
  // the manifest state; throws CorruptManifest on divergence.
  void verify_journal_replay() const;

  // Drops payload blobs not referenced by the current manifest records.
  GcStats gc();

 private:
  struct Impl;
  explicit Store(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace medflow
