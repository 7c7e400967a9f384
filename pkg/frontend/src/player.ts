/** WAV playback via a blob URL and a plain <audio> element. */

export class Player {
  private audio: HTMLAudioElement | null = null;
  private url: string | null = null;

  play(wav: ArrayBuffer): void {
    this.stop();
    const blob = new Blob([wav], { type: "audio/wav" });
    this.url = URL.createObjectURL(blob);
    this.audio = new Audio(this.url);
    this.audio.addEventListener("ended", () => this.release());
    void this.audio.play();
  }

  stop(): void {
    if (this.audio) {
      this.audio.pause();
      this.release();
    }
  }

  private release(): void {
    if (this.url) URL.revokeObjectURL(this.url);
    this.url = null;
    this.audio = null;
  }
}
