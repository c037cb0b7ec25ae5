#pragma once

// Umbrella header: the full fusion toolkit in dependency order.

#include "segfuse/errors.hpp"
#include "segfuse/rng.hpp"
#include "segfuse/base64.hpp"
#include "segfuse/tensor.hpp"
#include "segfuse/ops.hpp"
#include "segfuse/grad_check.hpp"
#include "segfuse/nn.hpp"
#include "segfuse/mask.hpp"
#include "segfuse/branches.hpp"
#include "segfuse/metrics.hpp"
#include "segfuse/interaction.hpp"
#include "segfuse/integration.hpp"
#include "segfuse/model.hpp"
#include "segfuse/forward.hpp"
#include "segfuse/training.hpp"
#include "segfuse/synthetic.hpp"
#include "segfuse/corpus_io.hpp"
#include "segfuse/checkpoint.hpp"
#include "segfuse/pipeline.hpp"
#include "segfuse/reports.hpp"
#include "segfuse/cli.hpp"
