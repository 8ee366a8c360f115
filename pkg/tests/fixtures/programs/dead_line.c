int a;
int b(char c) {
  return (a>=2||c>>a)
             ? c
             : 0;
}
int main(){return b(0);}
