#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <sstream>

#include "dmnrank/error.hpp"
#include "dmnrank/eval.hpp"
#include "dmnrank/knowledge.hpp"
#include "dmnrank/model.hpp"
#include "dmnrank/pipeline.hpp"
#include "dmnrank/retrieval.hpp"
#include "dmnrank/text.hpp"

namespace py = pybind11;
using namespace dmnrank;

namespace {

using PairTuple = std::tuple<std::string, Tokens, Tokens>;

std::vector<QAPair> to_pairs(const std::vector<PairTuple>& tuples) {
  std::vector<QAPair> out;
  out.reserve(tuples.size());
  for (const auto& [id, q, a] : tuples) out.push_back({id, q, a});
  return out;
}

std::vector<std::vector<double>> to_rows(const nn::Tensor& t) {
  std::vector<std::vector<double>> rows(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) rows[i][j] = t(i, j);
  return rows;
}

/// Owns the index and collection a KnowledgeBase points into.
struct Knowledge {
  InvertedIndex index;
  QaCollection collection;
  std::unique_ptr<KnowledgeBase> base;

  Knowledge(const std::vector<PairTuple>& pairs, IndexField field, KnowledgeOptions options)
      : index(build_index(to_pairs(pairs), field)), collection(to_pairs(pairs)) {
    base = std::make_unique<KnowledgeBase>(index, &collection, options);
  }
};

struct Model {
  Checkpoint checkpoint;

  std::vector<std::pair<std::size_t, double>> rank(const std::vector<Tokens>& context,
                                                   const std::vector<Tokens>& candidates,
                                                   const Knowledge* knowledge) const {
    DialogExample ex{"query", context, {}};
    for (const auto& c : candidates) ex.candidates.push_back({c, 0});
    auto prepared = prepare_example(ex, checkpoint.vocab, checkpoint.config, knowledge ? knowledge->base.get() : nullptr);
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto& e : dmnrank::rank(prepared, checkpoint.params, checkpoint.config)) out.emplace_back(e.candidate, e.score);
    return out;
  }
};

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["map"] = r.map;
  d["mrr"] = r.mrr;
  d["recall_1"] = r.recall_1;
  d["recall_2"] = r.recall_2;
  d["recall_5"] = r.recall_5;
  d["groups"] = r.groups;
  d["groups_skipped"] = r.groups_skipped;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Knowledge-augmented response ranking";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "tokenize",
      [](const std::string& text, bool lowercase, bool strip_punctuation, std::vector<std::string> stopwords) {
        Tokenizer::Options o;
        o.lowercase = lowercase;
        o.strip_punctuation = strip_punctuation;
        o.stopwords.insert(stopwords.begin(), stopwords.end());
        return Tokenizer(std::move(o))(text);
      },
      py::arg("text"), py::arg("lowercase") = true, py::arg("strip_punctuation") = true,
      py::arg("stopwords") = std::vector<std::string>{});

  py::class_<InvertedIndex>(m, "Index")
      .def_static(
          "build",
          [](const std::vector<PairTuple>& pairs, const std::string& field) {
            return build_index(to_pairs(pairs), parse_index_field(field));
          },
          py::arg("pairs"), py::arg("field") = "concatenated", "Index (id, question_tokens, answer_tokens) tuples.")
      .def_static("load", py::overload_cast<const std::filesystem::path&>(&InvertedIndex::load))
      .def("save", py::overload_cast<const std::filesystem::path&>(&InvertedIndex::save, py::const_))
      .def_property_readonly("doc_count", &InvertedIndex::doc_count)
      .def_property_readonly("avg_doc_len", &InvertedIndex::avg_doc_len)
      .def_property_readonly("field", [](const InvertedIndex& i) { return std::string(to_string(i.field())); })
      .def(
          "search",
          [](const InvertedIndex& i, const Tokens& query, std::size_t k, double k1, double b) {
            std::vector<std::pair<std::string, double>> out;
            for (const auto& h : i.search(query, k, Bm25Params{k1, b})) out.emplace_back(h.doc_id, h.score);
            return out;
          },
          py::arg("query"), py::arg("k") = 10, py::arg("k1") = 1.2, py::arg("b") = 0.75);

  m.def(
      "expand_response",
      [](const Tokens& response, const InvertedIndex& index, std::size_t feedback_docs, std::size_t terms) {
        return expand_response(response, index, feedback_docs, terms);
      },
      py::arg("response"), py::arg("index"), py::arg("feedback_docs") = 10, py::arg("terms") = 10);

  m.def(
      "ppmi_matrix",
      [](const Tokens& response, const Tokens& utterance, const std::vector<PairTuple>& pairs,
         const std::string& counting) {
        auto qa = to_pairs(pairs);
        return to_rows(ppmi_matrix(response, utterance, qa, parse_ppmi_counting(counting)));
      },
      py::arg("response"), py::arg("utterance"), py::arg("pairs"), py::arg("counting") = "frequency");

  py::class_<Knowledge>(m, "Knowledge")
      .def(py::init([](const std::vector<PairTuple>& pairs, const std::string& field, std::size_t prf_docs,
                       std::size_t expansion_terms, std::size_t kd_pairs) {
             KnowledgeOptions o;
             o.prf_docs = prf_docs;
             o.expansion_terms = expansion_terms;
             o.kd_pairs = kd_pairs;
             return std::make_unique<Knowledge>(pairs, parse_index_field(field), o);
           }),
           py::arg("pairs"), py::arg("field") = "answer", py::arg("prf_docs") = 10, py::arg("expansion_terms") = 10,
           py::arg("kd_pairs") = 10)
      .def("expansion", [](const Knowledge& k, const Tokens& r) { return k.base->expansion(r); })
      .def("related_pairs", [](const Knowledge& k, const Tokens& r) {
        std::vector<std::string> ids;
        for (const auto& p : k.base->related_pairs(r)) ids.push_back(p.id);
        return ids;
      });

  m.def("average_precision", [](std::vector<int> labels) { return average_precision({"", std::move(labels)}); });
  m.def("reciprocal_rank", [](std::vector<int> labels) { return reciprocal_rank({"", std::move(labels)}); });
  m.def("recall_at_k", [](std::vector<int> labels, std::size_t k) { return recall_at_k({"", std::move(labels)}, k); });
  m.def(
      "evaluate",
      [](const std::vector<std::vector<int>>& groups) {
        std::vector<RankedLabels> r;
        for (std::size_t i = 0; i < groups.size(); ++i) r.push_back({std::to_string(i), groups[i]});
        return report_dict(evaluate(r));
      },
      "Metrics over ranked 0/1 label lists, best first.");

  py::class_<Model>(m, "Model")
      .def_static("load", [](const std::filesystem::path& path) { return Model{load_checkpoint(path)}; })
      .def_property_readonly("variant",
                             [](const Model& mdl) { return std::string(to_string(mdl.checkpoint.config.variant)); })
      .def_property_readonly("settings", [](const Model& mdl) { return mdl.checkpoint.config.to_settings(); })
      .def("rank", &Model::rank, py::arg("context"), py::arg("candidates"), py::arg("knowledge") = nullptr,
           "Candidate indices and scores, best first.");

  m.def(
      "run_command",
      [](const std::string& command, const std::map<std::string, std::string>& settings) {
        RunConfig cfg;
        for (const auto& [k, v] : settings) cfg.apply(k, v);
        std::ostringstream out;
        run_command(parse_command(command), cfg, out);
        return out.str();
      },
      py::arg("command"), py::arg("settings"), "Runs a CLI command and returns what it printed.");
}
