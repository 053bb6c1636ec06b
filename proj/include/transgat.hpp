#pragma once

#include "transgat/conllu.hpp"
#include "transgat/data.hpp"
#include "transgat/essay_stream.hpp"
#include "transgat/gat.hpp"
#include "transgat/gradcheck.hpp"
#include "transgat/graph.hpp"
#include "transgat/io.hpp"
#include "transgat/model.hpp"
#include "transgat/ops.hpp"
#include "transgat/qwk.hpp"
#include "transgat/synth.hpp"
#include "transgat/tensor.hpp"
#include "transgat/train.hpp"
#include "transgat/selfcheck.hpp"
