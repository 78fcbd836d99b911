#include "medflow/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>

#include "medflow/util.hpp"

namespace medflow {

namespace fs = std::filesystem;

DatasetRole infer_role(const std::string& name, std::size_t rank) {
  auto has_prefix = [&](std::string_view p) { return name.rfind(p, 0) == 0; };
  if (has_prefix("mask2D") && rank == 2) return DatasetRole::Mask2D;
  if (has_prefix("volume3D") && rank == 3) return DatasetRole::Volume3D;
  if (has_prefix("3Dmask") && rank == 3) return DatasetRole::Mask3D;
  if (has_prefix("4Dseries") && rank == 4) return DatasetRole::Series4D;
  if (has_prefix("table") && rank == 2) return DatasetRole::Table;
  return DatasetRole::Unknown;
}

std::string role_name(DatasetRole role) {
  switch (role) {
    case DatasetRole::Mask2D: return "Mask2D";
    case DatasetRole::Volume3D: return "Volume3D";
    case DatasetRole::Mask3D: return "Mask3D";
    case DatasetRole::Series4D: return "Series4D";
    case DatasetRole::Table: return "Table";
    case DatasetRole::Scalar: return "Scalar";
    case DatasetRole::Unknown: return "Unknown";
  }
  return "Unknown";
}

std::string journal_op_name(JournalOp op) {
  switch (op) {
    case JournalOp::Write: return "write";
    case JournalOp::Overwrite: return "overwrite";
    case JournalOp::Annotate: return "annotate";
  }
  return "?";
}

namespace {

JournalOp journal_op_from(const std::string& s) {
  if (s == "write") return JournalOp::Write;
  if (s == "overwrite") return JournalOp::Overwrite;
  if (s == "annotate") return JournalOp::Annotate;
  throw CorruptManifestError("unknown journal op '" + s + "'");
}

std::uint64_t parse_u64(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw CorruptManifestError(std::string("bad ") + what + " field '" + s + "'");
  return std::stoull(s);
}

std::uint64_t parse_hex64(const std::string& s, const char* what) {
  if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") != std::string::npos)
    throw CorruptManifestError(std::string("bad ") + what + " field '" + s + "'");
  return std::stoull(s, nullptr, 16);
}

void check_attr(const std::string& key, const std::string& value) {
  if (!valid_name(key)) throw BadAttrError("attr key '" + key + "' violates name grammar");
  if (value.find('\t') != std::string::npos || value.find('\n') != std::string::npos)
    throw BadAttrError("attr value for '" + key + "' contains tab or newline");
}

std::string selector_to_string(std::span<const std::uint64_t> sel) {
  std::string out;
  for (std::size_t i = 0; i < sel.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(sel[i]);
  }
  return out;
}

std::vector<std::uint64_t> selector_from_string(const std::string& s) {
  std::vector<std::uint64_t> out;
  if (s.empty()) return out;
  for (const std::string& part : split(s, ','))
    out.push_back(parse_u64(part, "selector"));
  return out;
}

struct ManifestRec {
  DType dtype = DType::U8;
  std::vector<std::uint64_t> shape;
  std::string payload_file;
  std::uint64_t content_hash = 0;
  std::map<std::string, std::string> attrs;
  std::uint64_t payload_bytes = 0;
};

std::atomic<std::uint64_t> g_tmp_counter{0};

}  // namespace

struct Store::Impl {
  fs::path root;
  Mode mode = Mode::ReadWrite;
  int lock_fd = -1;

  mutable std::shared_mutex mu;
  std::map<std::string, ManifestRec> current;
  std::vector<JournalEntry> journal;
  std::map<std::string, std::vector<Annotation>> annotations;
  std::size_t annotation_total = 0;

  std::ofstream manifest_out;
  std::ofstream journal_out;
  std::ofstream annotations_out;

  ~Impl() {
    if (lock_fd >= 0) {
      ::flock(lock_fd, LOCK_UN);
      ::close(lock_fd);
    }
  }

  void require_writable() const {
    if (mode != Mode::ReadWrite)
      throw ReadOnlyStoreError("store opened read-only: " + root.string());
  }

  std::string manifest_line(const std::string& name, const ManifestRec& rec) const {
    std::string line = name;
    line += '\t';
    line += dtype_name(rec.dtype);
    line += '\t';
    line += std::to_string(rec.shape.size());
    line += '\t';
    for (std::size_t i = 0; i < rec.shape.size(); ++i) {
      if (i) line += ',';
      line += std::to_string(rec.shape[i]);
    }
    line += '\t';
    line += rec.payload_file;
    for (const auto& [k, v] : rec.attrs) {
      line += '\t';
      line += k;
      line += '=';
      line += v;
    }
    return line;
  }

  void append_manifest(const std::string& name, const ManifestRec& rec) {
    manifest_out << manifest_line(name, rec) << '\n';
    manifest_out.flush();
  }

  JournalEntry append_journal(JournalOp op, const std::string& dataset,
                              std::uint64_t hash, const std::string& actor) {
    JournalEntry e;
    e.seq = journal.empty() ? 1 : journal.back().seq + 1;
    e.timestamp = utc_now();
    e.actor = actor;
    e.op = op;
    e.dataset = dataset;
    e.content_hash = hash;
    journal_out << e.seq << '\t' << e.timestamp << '\t' << e.actor << '\t'
                << journal_op_name(op) << '\t' << dataset << '\t'
                << hex64(hash) << '\n';
    journal_out.flush();
    journal.push_back(e);
    return e;
  }

  JournalEntry commit_payload(const std::string& name, DType dtype,
                              std::span<const std::uint64_t> shape,
                              const fs::path& tmp, std::uint64_t hash,
                              std::uint64_t nbytes,
                              const std::map<std::string, std::string>& attrs,
                              const std::string& actor) {
    ManifestRec rec;
    rec.dtype = dtype;
    rec.shape.assign(shape.begin(), shape.end());
    rec.payload_file = hex64(hash) + ".bin";
    rec.content_hash = hash;
    rec.attrs = attrs;
    rec.payload_bytes = nbytes;

    fs::path target = root / rec.payload_file;
    if (fs::exists(target)) {
      fs::remove(tmp);  // content-addressed: identical bytes already present
    } else {
      fs::rename(tmp, target);
    }

    bool existed = current.count(name) > 0;
    append_manifest(name, rec);
    current[name] = std::move(rec);
    return append_journal(existed ? JournalOp::Overwrite : JournalOp::Write,
                          name, hash, actor);
  }

  void load();
};

void Store::Impl::load() {
  // Manifest: append-only, last record per name wins.
  std::ifstream mf(root / "manifest.tsv");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(mf, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = split(line, '\t');
    if (f.size() < 5)
      throw CorruptManifestError("manifest line " + std::to_string(lineno) +
                                 ": expected >=5 fields, got " + std::to_string(f.size()));
    const std::string& name = f[0];
    if (!valid_name(name))
      throw CorruptManifestError("manifest line " + std::to_string(lineno) +
                                 ": bad dataset name '" + name + "'");
    ManifestRec rec;
    rec.dtype = dtype_from_name(f[1]);
    std::uint64_t rank = parse_u64(f[2], "rank");
    std::vector<std::string> dims = f[3].empty() ? std::vector<std::string>{} : split(f[3], ',');
    if (dims.size() != rank)
      throw CorruptManifestError("manifest line " + std::to_string(lineno) +
                                 ": rank/dims mismatch");
    for (const std::string& d : dims) {
      std::uint64_t v = parse_u64(d, "dim");
      if (v == 0)
        throw CorruptManifestError("manifest line " + std::to_string(lineno) + ": zero dim");
      rec.shape.push_back(v);
    }
    rec.payload_file = f[4];
    if (rec.payload_file.size() != 20 || rec.payload_file.substr(16) != ".bin")
      throw CorruptManifestError("manifest line " + std::to_string(lineno) +
                                 ": bad payload file '" + rec.payload_file + "'");
    rec.content_hash = parse_hex64(rec.payload_file.substr(0, 16), "payload hash");
    for (std::size_t i = 5; i < f.size(); ++i) {
      std::size_t eq = f[i].find('=');
      if (eq == std::string::npos)
        throw CorruptManifestError("manifest line " + std::to_string(lineno) +
                                   ": attr without '='");
      rec.attrs[f[i].substr(0, eq)] = f[i].substr(eq + 1);
    }
    rec.payload_bytes = element_size(rec.dtype) * element_count(rec.shape);
    current[name] = std::move(rec);
  }

  // Every current payload must exist with the exact declared length.
  for (const auto& [name, rec] : current) {
    fs::path p = root / rec.payload_file;
    std::error_code ec;
    std::uint64_t actual = fs::file_size(p, ec);
    if (ec)
      throw CorruptManifestError("dataset '" + name + "': payload file missing: " +
                                 rec.payload_file);
    if (actual != rec.payload_bytes)
      throw CorruptManifestError("dataset '" + name + "': payload truncated (" +
                                 std::to_string(actual) + " of " +
                                 std::to_string(rec.payload_bytes) + " bytes)");
  }

  std::ifstream jf(root / "journal.log");
  lineno = 0;
  while (std::getline(jf, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = split(line, '\t');
    if (f.size() != 6)
      throw CorruptManifestError("journal line " + std::to_string(lineno) +
                                 ": expected 6 fields");
    JournalEntry e;
    e.seq = parse_u64(f[0], "seq");
    e.timestamp = f[1];
    e.actor = f[2];
    e.op = journal_op_from(f[3]);
    e.dataset = f[4];
    e.content_hash = parse_hex64(f[5], "journal hash");
    if (!journal.empty() && e.seq <= journal.back().seq)
      throw CorruptManifestError("journal seq not strictly increasing at line " +
                                 std::to_string(lineno));
    journal.push_back(std::move(e));
  }

  std::ifstream af(root / "annotations.tsv");
  lineno = 0;
  while (std::getline(af, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f = split(line, '\t');
    if (f.size() != 5)
      throw CorruptManifestError("annotation line " + std::to_string(lineno) +
                                 ": expected 5 fields");
    Annotation a;
    a.dataset = f[0];
    a.selector = selector_from_string(f[1]);
    a.label = f[2];
    a.actor = f[3];
    a.timestamp = f[4];
    annotations[a.dataset].push_back(std::move(a));
    ++annotation_total;
  }
}

Store::Store(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Store::Store(Store&&) noexcept = default;
Store& Store::operator=(Store&&) noexcept = default;
Store::~Store() = default;

Store Store::open(const fs::path& dir, Mode mode) {
  auto impl = std::make_unique<Impl>();
  impl->root = dir;
  impl->mode = mode;

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CorruptManifestError("cannot create store dir: " + dir.string());

  if (mode == Mode::ReadWrite) {
    fs::path lock_path = dir / "lock";
    int fd = ::open(lock_path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd < 0) throw CorruptManifestError("cannot open lock file: " + lock_path.string());
    if (::flock(fd, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd);
      throw LockHeldError("another writer holds " + lock_path.string());
    }
    impl->lock_fd = fd;
  }

  impl->load();

  if (mode == Mode::ReadWrite) {
    impl->manifest_out.open(dir / "manifest.tsv", std::ios::app);
    impl->journal_out.open(dir / "journal.log", std::ios::app);
    impl->annotations_out.open(dir / "annotations.tsv", std::ios::app);
    if (!impl->manifest_out || !impl->journal_out || !impl->annotations_out)
      throw CorruptManifestError("cannot open store files for append in " + dir.string());
  }
  return Store(std::move(impl));
}

const fs::path& Store::root() const { return impl_->root; }
Store::Mode Store::mode() const { return impl_->mode; }

JournalEntry Store::write_dataset(const std::string& name, DType dtype,
                                  std::span<const std::uint64_t> shape,
                                  std::span<const std::uint8_t> payload,
                                  const std::map<std::string, std::string>& attrs,
                                  const std::string& actor) {
  impl_->require_writable();
  if (!valid_name(name))
    throw NameGrammarError("dataset name '" + name + "' must match [A-Za-z0-9_]+ (<=128)");
  if (shape.empty()) throw SizeMismatchError("shape must have at least one dim");
  for (std::uint64_t d : shape)
    if (d == 0) throw SizeMismatchError("shape dims must be positive");
  for (const auto& [k, v] : attrs) check_attr(k, v);
  std::uint64_t expect = element_size(dtype) * element_count(shape);
  if (payload.size() != expect)
    throw SizeMismatchError("payload is " + std::to_string(payload.size()) +
                            " bytes, shape needs " + std::to_string(expect));

  std::unique_lock lk(impl_->mu);
  std::uint64_t hash = fnv1a64(payload);
  fs::path tmp = impl_->root / ("tmp_" + std::to_string(::getpid()) + "_" +
                                std::to_string(g_tmp_counter.fetch_add(1)));
  {
    std::ofstream out(tmp, std::ios::binary);
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    if (!out) throw CorruptManifestError("payload write failed: " + tmp.string());
  }
  return impl_->commit_payload(name, dtype, shape, tmp, hash, payload.size(), attrs, actor);
}

JournalEntry Store::write_dataset_stream(
    const std::string& name, DType dtype, std::span<const std::uint64_t> shape,
    const std::function<std::size_t(std::span<std::uint8_t>)>& next,
    const std::map<std::string, std::string>& attrs, const std::string& actor) {
  impl_->require_writable();
  if (!valid_name(name))
    throw NameGrammarError("dataset name '" + name + "' must match [A-Za-z0-9_]+ (<=128)");
  if (shape.empty()) throw SizeMismatchError("shape must have at least one dim");
  for (const auto& [k, v] : attrs) check_attr(k, v);
  std::uint64_t expect = element_size(dtype) * element_count(shape);

  std::unique_lock lk(impl_->mu);
  fs::path tmp = impl_->root / ("tmp_" + std::to_string(::getpid()) + "_" +
                                std::to_string(g_tmp_counter.fetch_add(1)));
  std::uint64_t hash = 14695981039346656037ULL;
  std::uint64_t total = 0;
  {
    std::ofstream out(tmp, std::ios::binary);
    std::vector<std::uint8_t> buf(1 << 16);
    for (;;) {
      std::size_t n = next(std::span<std::uint8_t>(buf));
      if (n == 0) break;
      if (n > buf.size()) n = buf.size();
      for (std::size_t i = 0; i < n; ++i) {
        hash ^= buf[i];
        hash *= 1099511628211ULL;
      }
      out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(n));
      total += n;
      if (total > expect) break;
    }
    if (!out) throw CorruptManifestError("payload write failed: " + tmp.string());
  }
  if (total != expect) {
    fs::remove(tmp);
    throw SizeMismatchError("stream produced " + std::to_string(total) +
                            " bytes, shape needs " + std::to_string(expect));
  }
  return impl_->commit_payload(name, dtype, shape, tmp, hash, total, attrs, actor);
}

DatasetRecord Store::read_dataset(const std::string& name) const {
  std::shared_lock lk(impl_->mu);
  auto it = impl_->current.find(name);
  if (it == impl_->current.end()) throw NotFoundError("dataset '" + name + "'");
  const ManifestRec& rec = it->second;
  DatasetRecord out;
  out.name = name;
  out.dtype = rec.dtype;
  out.shape = rec.shape;
  out.attrs = rec.attrs;
  out.payload.resize(rec.payload_bytes);
  std::ifstream in(impl_->root / rec.payload_file, std::ios::binary);
  in.read(reinterpret_cast<char*>(out.payload.data()),
          static_cast<std::streamsize>(out.payload.size()));
  if (static_cast<std::uint64_t>(in.gcount()) != rec.payload_bytes)
    throw CorruptManifestError("dataset '" + name + "': payload short read");
  return out;
}

void Store::read_payload_chunks(
    const std::string& name,
    const std::function<void(std::span<const std::uint8_t>)>& sink,
    std::size_t chunk_bytes) const {
  std::shared_lock lk(impl_->mu);
  auto it = impl_->current.find(name);
  if (it == impl_->current.end()) throw NotFoundError("dataset '" + name + "'");
  std::ifstream in(impl_->root / it->second.payload_file, std::ios::binary);
  std::vector<std::uint8_t> buf(std::max<std::size_t>(chunk_bytes, 1));
  std::uint64_t remaining = it->second.payload_bytes;
  while (remaining > 0) {
    std::size_t want = static_cast<std::size_t>(
        std::min<std::uint64_t>(remaining, buf.size()));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(want));
    if (static_cast<std::size_t>(in.gcount()) != want)
      throw CorruptManifestError("dataset '" + name + "': payload short read");
    sink(std::span<const std::uint8_t>(buf.data(), want));
    remaining -= want;
  }
}

bool Store::contains(const std::string& name) const {
  std::shared_lock lk(impl_->mu);
  return impl_->current.count(name) > 0;
}

DatasetInfo Store::stat_dataset(const std::string& name) const {
  std::shared_lock lk(impl_->mu);
  auto it = impl_->current.find(name);
  if (it == impl_->current.end()) throw NotFoundError("dataset '" + name + "'");
  const ManifestRec& rec = it->second;
  DatasetInfo info;
  info.name = name;
  info.dtype = rec.dtype;
  info.shape = rec.shape;
  info.attrs = rec.attrs;
  info.content_hash = rec.content_hash;
  info.role = infer_role(name, rec.shape.size());
  info.payload_bytes = rec.payload_bytes;
  return info;
}

std::vector<DatasetInfo> Store::list_datasets(const std::string& pattern) const {
  std::shared_lock lk(impl_->mu);
  std::vector<DatasetInfo> out;
  for (const auto& [name, rec] : impl_->current) {  // std::map: already sorted
    if (!glob_match(pattern, name)) continue;
    DatasetInfo info;
    info.name = name;
    info.dtype = rec.dtype;
    info.shape = rec.shape;
    info.attrs = rec.attrs;
    info.content_hash = rec.content_hash;
    info.role = infer_role(name, rec.shape.size());
    info.payload_bytes = rec.payload_bytes;
    out.push_back(std::move(info));
  }
  return out;
}

std::vector<std::string> Store::dataset_names() const {
  std::shared_lock lk(impl_->mu);
  std::vector<std::string> out;
  out.reserve(impl_->current.size());
  for (const auto& [name, rec] : impl_->current) out.push_back(name);
  return out;
}

JournalEntry Store::annotate(const Annotation& annotation) {
  impl_->require_writable();
  std::unique_lock lk(impl_->mu);
  auto it = impl_->current.find(annotation.dataset);
  if (it == impl_->current.end())
    throw NotFoundError("dataset '" + annotation.dataset + "'");
  const ManifestRec& rec = it->second;
  if (annotation.selector.size() != rec.shape.size())
    throw SelectorOutOfBoundsError("selector rank " +
                                   std::to_string(annotation.selector.size()) +
                                   " vs dataset rank " + std::to_string(rec.shape.size()));
  for (std::size_t i = 0; i < rec.shape.size(); ++i)
    if (annotation.selector[i] >= rec.shape[i])
      throw SelectorOutOfBoundsError("index " + std::to_string(annotation.selector[i]) +
                                     " out of bounds for dim " + std::to_string(i));
  if (annotation.label.find('\t') != std::string::npos ||
      annotation.label.find('\n') != std::string::npos)
    throw BadAttrError("annotation label contains tab or newline");

  Annotation a = annotation;
  if (a.timestamp.empty()) a.timestamp = utc_now();
  std::string line = a.dataset + '\t' + selector_to_string(a.selector) + '\t' +
                     a.label + '\t' + a.actor + '\t' + a.timestamp;
  impl_->annotations_out << line << '\n';
  impl_->annotations_out.flush();
  impl_->annotations[a.dataset].push_back(a);
  ++impl_->annotation_total;
  return impl_->append_journal(JournalOp::Annotate, a.dataset, fnv1a64(line), a.actor);
}

std::vector<Annotation> Store::annotations(const std::string& dataset) const {
  std::shared_lock lk(impl_->mu);
  auto it = impl_->annotations.find(dataset);
  if (it == impl_->annotations.end()) return {};
  return it->second;
}

std::size_t Store::annotation_count() const {
  std::shared_lock lk(impl_->mu);
  return impl_->annotation_total;
}

std::vector<JournalEntry> Store::history(const std::string& name) const {
  std::shared_lock lk(impl_->mu);
  std::vector<JournalEntry> out;
  for (const JournalEntry& e : impl_->journal)
    if (e.dataset == name) out.push_back(e);
  return out;
}

std::vector<JournalEntry> Store::journal() const {
  std::shared_lock lk(impl_->mu);
  return impl_->journal;
}

std::uint64_t Store::journal_seq() const {
  std::shared_lock lk(impl_->mu);
  return impl_->journal.empty() ? 0 : impl_->journal.back().seq;
}

std::map<std::string, std::string> Store::digests() const {
  std::shared_lock lk(impl_->mu);
  std::map<std::string, std::string> out;
  for (const auto& [name, rec] : impl_->current) out[name] = hex64(rec.content_hash);
  return out;
}

void Store::verify_journal_replay() const {
  std::shared_lock lk(impl_->mu);
  std::map<std::string, std::uint64_t> replayed;
  for (const JournalEntry& e : impl_->journal) {
    if (e.op == JournalOp::Annotate) continue;
    if (e.op == JournalOp::Write && replayed.count(e.dataset))
      throw CorruptManifestError("journal replays 'write' onto existing '" + e.dataset + "'");
    if (e.op == JournalOp::Overwrite && !replayed.count(e.dataset))
      throw CorruptManifestError("journal replays 'overwrite' onto missing '" + e.dataset + "'");
    replayed[e.dataset] = e.content_hash;
  }
  if (replayed.size() != impl_->current.size())
    throw CorruptManifestError("journal replay yields " + std::to_string(replayed.size()) +
                               " datasets, manifest has " +
                               std::to_string(impl_->current.size()));
  for (const auto& [name, hash] : replayed) {
    auto it = impl_->current.find(name);
    if (it == impl_->current.end())
      throw CorruptManifestError("journal dataset '" + name + "' missing from manifest");
    if (it->second.content_hash != hash)
      throw CorruptManifestError("journal hash diverges from manifest for '" + name + "'");
  }
}

GcStats Store::gc() {
  impl_->require_writable();
  std::unique_lock lk(impl_->mu);
  std::set<std::string> live;
  for (const auto& [name, rec] : impl_->current) live.insert(rec.payload_file);
  GcStats stats;
  for (const fs::directory_entry& entry : fs::directory_iterator(impl_->root)) {
    if (!entry.is_regular_file()) continue;
    std::string fn = entry.path().filename().string();
    bool payload = fn.size() == 20 && fn.substr(16) == ".bin";
    bool stale_tmp = fn.rfind("tmp_", 0) == 0;
    if ((payload && !live.count(fn)) || stale_tmp) {
      stats.bytes_freed += entry.file_size();
      fs::remove(entry.path());
      ++stats.files_removed;
    }
  }
  return stats;
}

}  // namespace medflow
