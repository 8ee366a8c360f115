#include <stdio.h>
int g_0 = 2;
int g_1 = 1;
int func_4(void) {
  int l_1 = ((g_1 == ((g_0 & 255) >> 0))) & 255;
  g_1 = (g_0) & 255;
  g_1 = (2) & 255;
  int l_2;
  for (l_2 = 0; l_2 < 3; l_2++) {
    int l_3 = (((l_2 | 4) - l_1)) & 255;
    g_0 = ((g_0 & 4)) & 255;
    int l_4;
    for (l_4 = 0; l_4 < 3; l_4++) {
      l_1 = (g_0 < l_2)
          ? ((g_1 * 2)) & 255
          : (l_3) & 255;
      g_1 = (((7 & 255) >> 1)) & 255;
    }
  }
  if (l_1 == g_0) {
    int l_5 = (l_1) & 255;
    g_1 = ((l_5 && l_1)) & 255;
  } else {
    int l_6 = ((g_1 ^ (g_1 + g_0))) & 255;
    l_1 = (g_0) & 255;
  }
  return (((g_1 || g_0) == (5 % ((g_0 & 7) + 1)))) & 255;
}
static int func_3(int *p_3_0, char p_3_1) {
  int l_7 = (((5 | 2) || (g_0 || g_1))) & 255;
  if (g_0 >= 9) {
    int l_8 = ((p_3_1 % ((g_1 & 7) + 1))) & 255;
    *p_3_0 = ((*p_3_0 | (*p_3_0 & l_7))) & 255;
  }
  *p_3_0 = (((g_1 != *p_3_0) == (l_7 || 8))) & 255;
  *p_3_0 = (p_3_1) & 255;
  l_7 = func_4() & 255;
  return (((4 / ((g_1 & 7) + 1)) < (p_3_1 / ((*p_3_0 & 7) + 1)))) & 255;
}
int func_2(short p_2_0, char p_2_1) {
  int l_9 = (((g_1 + p_2_0) + (5 / ((g_0 & 7) + 1)))) & 255;
  g_1 = (g_1 != l_9)
      ? (g_0) & 255
      : (((p_2_0 & 255) >> 0)) & 255;
  l_9 = (l_9 < g_1)
      ? ((((0 && p_2_0) & 255) >> 0)) & 255
      : (g_0) & 255;
  g_0 = (((2 | p_2_1) * 3)) & 255;
  int l_10;
  for (l_10 = 0; l_10 < 2; l_10++) {
    int l_11 = (p_2_0) & 255;
    l_11 = func_4() & 255;
    l_11 = ((g_1 + p_2_0)) & 255;
    if (l_10 < g_1) {
      int l_12 = ((7 || (g_1 | p_2_1))) & 255;
      int l_13 = ((((g_0 & 255) >> 2) | (l_10 / ((g_1 & 7) + 1)))) & 255;
      l_13 = (((l_9 % ((l_11 & 7) + 1)) < (l_10 < p_2_0))) & 255;
    } else {
      l_9 = func_4() & 255;
    }
  }
  return (2) & 255;
}
int func_1(unsigned p_1_0, int *p_1_1, int p_1_2) {
  int l_14 = (((*p_1_1 * 4) & (9 < p_1_2))) & 255;
  int l_15 = ((p_1_2 ^ 2)) & 255;
  int l_16;
  for (l_16 = 0; l_16 < 2; l_16++) {
    *p_1_1 = (*p_1_1 == g_1)
        ? (p_1_0) & 255
        : (p_1_2) & 255;
    g_0 = ((g_0 != p_1_2)) & 255;
    g_1 = (((l_14 | 4) / ((g_0 & 7) + 1))) & 255;
  }
  if (g_1 >= 0) {
    int l_17 = (((2 * 7) || (p_1_0 % ((p_1_2 & 7) + 1)))) & 255;
    int l_18 = ((g_1 != g_0)) & 255;
    if (p_1_0 < l_18) {
      int l_19 = (4) & 255;
      l_15 = func_2((((l_14 + l_15) | (p_1_2 == g_0))) & 127, ((l_15 ^ l_17)) & 127) & 255;
      l_19 = func_4() & 255;
      l_15 = (((*p_1_1 + l_15) + (*p_1_1 / ((*p_1_1 & 7) + 1)))) & 255;
    } else {
      int l_20 = (l_17) & 255;
      int l_21 = (p_1_2) & 255;
      l_17 = (((0 || g_0) ^ (5 + g_0))) & 255;
      l_21 = (*p_1_1) & 255;
      l_20 = func_3(&g_0, (((l_21 || g_1) / ((9 & 7) + 1))) & 127) & 255;
    }
  } else {
    l_14 = (p_1_2 <= l_15)
        ? (2) & 255
        : ((l_14 && p_1_2)) & 255;
  }
  return (g_0) & 255;
}
int main(void) {
  int l_22 = 6;
  g_1 = func_3(&g_0, (((g_0 | 0) != (l_22 && 4))) & 127) & 255;
  if (g_0 != l_22) {
    int l_23 = (g_1) & 255;
    int l_24 = (((8 % ((g_1 & 7) + 1)) || g_0)) & 255;
    g_0 = (1 != g_0)
        ? ((l_23 || (l_23 * 3))) & 255
        : (((g_0 + l_23) < (g_0 * 5))) & 255;
    l_23 = (g_0 <= l_24)
        ? (((l_24 && 3) & (g_0 < g_1))) & 255
        : ((3 | (g_1 | g_1))) & 255;
    g_1 = (((l_24 + l_24) && l_24)) & 255;
  }
  g_1 = func_4() & 255;
  printf("%d\n", g_0 ^ g_1 ^ l_22);
  return 0;
}
