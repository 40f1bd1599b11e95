#pragma once

#include "dccf/ablation.hpp"
#include "dccf/checkpoint.hpp"
#include "dccf/config.hpp"
#include "dccf/data.hpp"
#include "dccf/disentangler.hpp"
#include "dccf/error.hpp"
#include "dccf/explain.hpp"
#include "dccf/judgment.hpp"
#include "dccf/metrics.hpp"
#include "dccf/numcore.hpp"
#include "dccf/pipeline.hpp"
#include "dccf/tensionfield.hpp"
#include "dccf/train.hpp"
