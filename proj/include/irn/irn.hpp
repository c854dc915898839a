#pragma once

#include "irn/adam.hpp"
#include "irn/checkpoint.hpp"
#include "irn/codec.hpp"
#include "irn/config.hpp"
#include "irn/conv.hpp"
#include "irn/crm.hpp"
#include "irn/data.hpp"
#include "irn/image.hpp"
#include "irn/layers.hpp"
#include "irn/losses.hpp"
#include "irn/metrics.hpp"
#include "irn/model.hpp"
#include "irn/png.hpp"
#include "irn/rdeval.hpp"
#include "irn/resample.hpp"
#include "irn/rng.hpp"
#include "irn/tensor.hpp"
#include "irn/threads.hpp"
#include "irn/train.hpp"
